import csv
import math

import pytest

import sparsecoarsen.cli as cli
from sparsecoarsen.cli import ConfigError, main, read_config, write_csv
from sparsecoarsen.errors import NumericalFailure


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestCsvWriting:
    def test_float_precision_and_line_endings(self, tmp_path):
        path = tmp_path / "x.csv"
        write_csv(path, ["a", "b"], [(1.0 / 3.0, 7)])
        raw = path.read_bytes()
        assert raw == b"a,b\n0.33333333333333331,7\n"

    def test_separator_sanitized_in_text(self, tmp_path):
        path = tmp_path / "x.csv"
        write_csv(path, ["status"], [("failed: a, b\nc",)])
        assert read_rows(path) == [["status"], ["failed: a; b c"]]

    def test_nan_round_trips(self, tmp_path):
        path = tmp_path / "x.csv"
        write_csv(path, ["v"], [(math.nan,)])
        assert math.isnan(float(read_rows(path)[1][0]))


class TestConfigFile:
    def test_values_parsed_with_comments(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("lambda = 0, 3.5\nm=1,2  # small cases\n\njobs=2\n")
        values = read_config(cfg)
        assert values == {"lambda": (0.0, 3.5), "m": (1, 2), "jobs": 2}

    def test_underscore_keys_accepted(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("max_iter=5\n")
        assert read_config(cfg) == {"max-iter": 5}

    def test_unknown_key_rejected(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("widht=3\n")
        with pytest.raises(ConfigError):
            read_config(cfg)

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            read_config(tmp_path / "absent.cfg")

    def test_bad_value_rejected(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("m=zero\n")
        with pytest.raises(ConfigError):
            read_config(cfg)

    def test_flags_override_config(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("m=1,2,3\nmax_iter=7\n")
        out = tmp_path / "o"
        code = main(["sd-convergence", "--config", str(cfg), "--m", "1",
                     "--out", str(out)])
        assert code == 0
        rows = read_rows(out / "sd_convergence.csv")[1:]
        assert {r[0] for r in rows} == {"1"}  # --m beat the config list
        assert max(int(r[1]) for r in rows) <= 7  # config max-iter applied


class TestExitCodes:
    def test_no_command_is_usage_error(self, capsys):
        assert main([]) == 2
        assert "usage" in capsys.readouterr().err.lower()

    def test_unknown_flag_is_usage_error(self, capsys):
        assert main(["sd-convergence", "--bogus"]) == 2

    def test_help_exits_cleanly(self, capsys):
        assert main(["--help"]) == 0
        assert "sd-convergence" in capsys.readouterr().out

    def test_multiple_lambdas_rejected_for_per_m_series(self, tmp_path):
        code = main(["lin-convergence", "--lambda", "0,1",
                     "--out", str(tmp_path)])
        assert code == 2

    def test_numerical_failure_keeps_partial_output(self, tmp_path,
                                                     monkeypatch):
        real = cli.linearized_minimize

        def flaky(problem, opts):
            if problem.n_local > 5:
                raise NumericalFailure("synthetic breakdown")
            return real(problem, opts)

        monkeypatch.setattr(cli, "linearized_minimize", flaky)
        code = main(["lin-convergence", "--m", "1,2", "--out", str(tmp_path)])
        assert code == 3
        rows = read_rows(tmp_path / "lin_convergence.csv")[1:]
        assert rows and all(r[0] == "1" for r in rows)  # m=1 kept
        marker = tmp_path / "lin_convergence.FAILED"
        assert "m=2" in marker.read_text()


class TestSchemas:
    def test_sd_convergence(self, tmp_path):
        assert main(["sd-convergence", "--m", "1", "--max-iter", "50",
                     "--out", str(tmp_path)]) == 0
        rows = read_rows(tmp_path / "sd_convergence.csv")
        assert rows[0] == ["m", "iteration", "error"]
        assert rows[1] == ["1", "0", "2.8284271247461903"]
        errs = [float(r[2]) for r in rows[1:]]
        assert all(b <= a for a, b in zip(errs, errs[1:]))

    def test_svd_spectrum_normalized(self, tmp_path):
        assert main(["svd-spectrum", "--m", "1,2",
                     "--out", str(tmp_path)]) == 0
        rows = read_rows(tmp_path / "svd_spectrum.csv")
        assert rows[0] == ["m", "index", "sigma_normalized"]
        by_m = {}
        for m, idx, val in rows[1:]:
            by_m.setdefault(m, []).append((int(idx), float(val)))
        for m, entries in by_m.items():
            assert [i for i, _ in entries] == list(range(1, len(entries) + 1))
            values = [v for _, v in entries]
            assert values[0] == 1.0
            assert all(b <= a for a, b in zip(values, values[1:]))
        assert len(by_m["1"]) == 5 and len(by_m["2"]) == 25

    def test_lin_convergence(self, tmp_path):
        assert main(["lin-convergence", "--m", "1",
                     "--out", str(tmp_path)]) == 0
        rows = read_rows(tmp_path / "lin_convergence.csv")
        assert rows[0] == ["m", "iteration", "error", "alpha",
                           "cond_eq7_estimate"]
        assert float(rows[1][3]) == 0.0  # no step taken yet at iteration 0
        assert float(rows[-1][2]) == pytest.approx(0.74382120488419345,
                                                   rel=1e-12)

    def test_spatial_decay(self, tmp_path):
        assert main(["spatial-decay", "--m", "1,2",
                     "--out", str(tmp_path)]) == 0
        rows = read_rows(tmp_path / "spatial_decay.csv")[1:]
        kinds = {r[0] for r in rows}
        assert kinds == {"error_vs_m", "column_norm_y", "column_norm_a"}
        curve = [r for r in rows if r[0] == "error_vs_m"]
        assert [float(r[1]) for r in curve] == [1.0, 2.0]
        per_node = [r for r in rows if r[0] == "column_norm_y"]
        assert len(per_node) == 13  # the m=2 region

    def test_lambda_sweep_and_symmetry(self, tmp_path):
        assert main(["lambda-sweep", "--lambda", "3,5", "--m", "1,2",
                     "--out", str(tmp_path)]) == 0
        rows = read_rows(tmp_path / "lambda_sweep.csv")
        assert rows[0][:6] == ["lambda", "m", "p", "q", "error", "iterations"]
        assert [(r[0], r[1]) for r in rows[1:]] == \
            [("3", "1"), ("3", "2"), ("5", "1"), ("5", "2")]
        assert all(r[-1] == "ok" for r in rows[1:])
        sym = read_rows(tmp_path / "lambda_sweep_symmetry.csv")
        assert sym[0] == ["lambda", "lambda_mirror", "m", "error",
                          "error_mirror", "rel_diff"]
        # 3 and 5 mirror each other inside the sweep, nothing recomputed
        assert [(r[0], r[1]) for r in sym[1:]] == \
            [("3", "5"), ("3", "5"), ("5", "3"), ("5", "3")]
        assert all(float(r[5]) <= 1e-10 for r in sym[1:])

    def test_global_verify(self, tmp_path):
        assert main(["global-verify", "--m", "2", "--lambda", "0,3.5",
                     "--out", str(tmp_path)]) == 0
        rows = read_rows(tmp_path / "global_verify.csv")
        assert rows[0] == ["m", "lambda", "local_error", "global_error",
                           "max_decoupled_offdiag"]
        assert len(rows) == 3
        for r in rows[1:]:
            assert float(r[3]) == pytest.approx(float(r[2]), rel=1e-12)


class TestDeterminism:
    def test_reruns_are_byte_identical(self, tmp_path):
        args = ["lambda-sweep", "--lambda", "0,4", "--m", "1,2",
                "--format", "csv+svg"]
        assert main(args + ["--out", str(tmp_path / "a")]) == 0
        assert main(args + ["--out", str(tmp_path / "b"), "--jobs", "3"]) == 0
        for name in ("lambda_sweep.csv", "lambda_sweep_symmetry.csv",
                     "lambda_sweep.svg"):
            assert (tmp_path / "a" / name).read_bytes() == \
                (tmp_path / "b" / name).read_bytes()

    def test_svg_written_on_request(self, tmp_path):
        assert main(["sd-convergence", "--m", "1", "--max-iter", "30",
                     "--out", str(tmp_path), "--format", "csv+svg"]) == 0
        svg = (tmp_path / "sd_convergence.svg").read_text()
        assert svg.startswith("<svg ") and "polyline" in svg
