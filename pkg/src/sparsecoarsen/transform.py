"""Transformation pairs, the Frobenius error norm, and steepest descent.

A pair (Y, A~) transforms the local operator as A_LL ~= Y^T A~ Y, where Y is
the inverse transformation restricted to the region: its boundary rows are
identity rows (so couplings to the exterior are preserved exactly) and only
the interior rows are free.  A~ is symmetric and confined to the target
sparsity pattern.  The quantity minimized is

    error(Y, A~) = || A_LL - Y^T A~ Y ||_F

which is invariant under the gauge (Y, A~) -> (D^-1 Y, D A~ D) for diagonal
D supported on the interior.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalFailure


@dataclass
class TransformPair:
    """Free variables of one transformation: interior rows of Y, and A~."""

    y_rows: np.ndarray  # (n_interior, n_local)
    a_tilde: np.ndarray  # (n_local, n_local) symmetric, zero off-pattern

    @property
    def n_interior(self):
        return self.y_rows.shape[0]

    @property
    def n_local(self):
        return self.y_rows.shape[1]

    def full_y(self):
        """Full square Y: free interior rows stacked over identity boundary rows.

        Relies on the region ordering placing interior nodes first.
        """
        n_i, n_l = self.y_rows.shape
        out = np.zeros((n_l, n_l))
        out[:n_i] = self.y_rows
        out[np.arange(n_i, n_l), np.arange(n_i, n_l)] = 1.0
        return out

    def copy(self):
        return TransformPair(self.y_rows.copy(), self.a_tilde.copy())


@dataclass
class ErrorReport:
    residual: np.ndarray  # A_LL - Y^T A~ Y, exactly symmetric
    norm: float


@dataclass
class IterationRecord:
    iteration: int
    error: float
    alpha: float
    null_dim: int | None = None
    gap_ratio: float | None = None
    cond_retained: float | None = None
    cond_eq7_estimate: float | None = None


@dataclass
class ConvergenceTrace:
    iterations: list = field(default_factory=list)
    converged: bool = False

    @property
    def final_error(self):
        return self.iterations[-1].error

    @property
    def n_steps(self):
        return len(self.iterations) - 1


def initial_guess(problem):
    """Y = identity, A~ = the local operator masked to the target pattern."""
    n_l, n_i = problem.n_local, problem.n_interior
    y_rows = np.eye(n_l)[:n_i].copy()
    a_tilde = np.where(problem.target_pattern.mask(), problem.a_ll, 0.0)
    return TransformPair(y_rows=y_rows, a_tilde=a_tilde)


def residual_and_error(problem, pair):
    """Residual A_LL - Y^T A~ Y (symmetrized exactly) and its Frobenius norm."""
    y = pair.full_y()
    s = y.T @ (pair.a_tilde @ y)
    s = 0.5 * (s + s.T)
    residual = problem.a_ll - s
    return ErrorReport(residual=residual, norm=float(np.linalg.norm(residual)))


def objective_gradient(problem, pair):
    """Gradient of the squared error norm in the free variables.

    Returns (grad_y, grad_a).  grad_y is (n_interior, n_local).  grad_a is a
    pattern-masked symmetric matrix holding the derivative with respect to
    each free value: a symmetric off-diagonal pair (i, j) is one variable, so
    positions (i, j) and (j, i) both carry d/da_ij.
    """
    y = pair.full_y()
    r = residual_and_error(problem, pair).residual
    grad_y = -4.0 * (pair.a_tilde @ y @ r)[: problem.n_interior]

    p = y @ r @ y.T
    p = 0.5 * (p + p.T)
    mask = problem.target_pattern.mask()
    grad_a = np.where(mask, -4.0 * p, 0.0)
    diag = np.arange(problem.n_local)
    on_diag = mask[diag, diag]
    grad_a[diag[on_diag], diag[on_diag]] = -2.0 * p[diag[on_diag], diag[on_diag]]
    return grad_y, grad_a


def interior_scaling(pair, d):
    """Gauge map (Y, A~) -> (D^-1 Y, D A~ D) for diagonal d over the interior."""
    d = np.asarray(d, dtype=float)
    if d.shape != (pair.n_interior,):
        raise ValueError("scale vector must have one entry per interior node")
    if np.any(d == 0.0):
        raise ValueError("scale factors must be nonzero")
    full = np.ones(pair.n_local)
    full[: pair.n_interior] = d
    return TransformPair(
        y_rows=pair.y_rows / d[:, None],
        a_tilde=pair.a_tilde * full[:, None] * full[None, :],
    )


def condition_of_y(pair):
    """2-norm condition number of Y after fixing the gauge by row normalization."""
    norms = np.linalg.norm(pair.y_rows, axis=1)
    if np.any(norms == 0.0) or not np.all(np.isfinite(norms)):
        raise NumericalFailure("Y has a zero or non-finite interior row")
    fixed = interior_scaling(pair, norms)
    s = np.linalg.svd(fixed.full_y(), compute_uv=False)
    if s[-1] <= 0.0 or not np.all(np.isfinite(s)):
        raise NumericalFailure("row-normalized Y is singular")
    return float(s[0] / s[-1])


def steepest_descent(problem, max_iter=1000, tol=1e-12):
    """Minimize the error norm by gradient descent with exact line search.

    Follows the negative gradient in the joint (Y, A~) variables; the step
    length reuses the exact degree-6 polynomial line search.  Stops when the
    relative error change drops below tol.  Returns (pair, trace).
    """
    from .linearized import line_search  # deferred: linearized imports this module

    pair = initial_guess(problem)
    err = residual_and_error(problem, pair).norm
    trace = ConvergenceTrace()
    trace.iterations.append(IterationRecord(iteration=0, error=err, alpha=0.0))

    for k in range(1, max_iter + 1):
        grad_y, grad_a = objective_gradient(problem, pair)
        alpha, new_err = line_search(problem, pair, -grad_y, -grad_a)
        if not np.isfinite(new_err):
            raise NumericalFailure("steepest descent produced a non-finite error", trace)
        pair.y_rows += alpha * -grad_y
        pair.a_tilde += alpha * -grad_a
        trace.iterations.append(IterationRecord(iteration=k, error=new_err, alpha=alpha))
        if abs(err - new_err) < tol * max(err, 1e-300):
            trace.converged = True
            err = new_err
            break
        err = new_err
    return pair, trace
