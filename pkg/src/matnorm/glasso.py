"""L1-penalized Gaussian precision estimation (graphical lasso).

Solves::

    minimize_{Theta > 0}  tr(A Theta) - log|Theta| + rho * sum_{i != j} |Theta_ij|

by block coordinate descent over the rows/columns of ``Theta``.  For
column ``j`` the conditional problem (all other entries fixed) profiles
out the diagonal entry through the Schur complement ``s = 1 / a_jj`` and
reduces to a lasso in the off-diagonal part ``x = Theta[-j, j]``::

    minimize_x  a_jj * x' M x + 2 a_1j' x + 2 rho ||x||_1,
    M = (Theta[-j, -j])^{-1}

which cyclic coordinate descent with soft thresholding solves to a KKT
tolerance of ``tol / 10``.  Each column update is an exact conditional
minimization, so the penalized objective is non-increasing across column
updates and sweeps.  ``M`` is obtained from the running inverse ``W`` by
a rank-one downdate; ``W`` is refreshed from a Cholesky inverse at the
start of every sweep to keep roundoff from accumulating.

The diagonal is unpenalized, so first-order optimality reads, with
``W = Theta^{-1}``::

    W_ii = A_ii,
    |A_ij - W_ij + rho * sign(Theta_ij)| = 0   for Theta_ij != 0, i != j,
    |A_ij - W_ij| <= rho                       for Theta_ij  = 0, i != j,

and :func:`kkt_residual` reports the largest violation of these
conditions.  With ``rho = 0`` the minimizer is the plain inverse and is
computed directly; a singular input is an error then rather than being
silently regularized.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NotPositiveDefinite
from .linalg import SpdMatrix, SymMatrix, cholesky, log_det

__all__ = [
    "GlassoProblem",
    "GlassoSolution",
    "glasso_solve",
    "kkt_residual",
    "glasso_objective",
    "soft_threshold",
]

_INNER_SWEEP_CAP = 1000


def soft_threshold(value: float, threshold: float) -> float:
    """Scalar soft-thresholding operator ``sign(v) * max(|v| - t, 0)``."""
    if value > threshold:
        return value - threshold
    if value < -threshold:
        return value + threshold
    return 0.0


def _input_matrix(a) -> np.ndarray:
    if isinstance(a, SymMatrix):
        return a.values
    return SymMatrix(a).values


@dataclass(frozen=True)
class GlassoProblem:
    """Problem data for one penalized precision fit.

    ``a`` is the sample-covariance surrogate (symmetric, strictly
    positive diagonal), ``rho`` the off-diagonal penalty level, ``tol``
    the KKT tolerance declaring convergence, ``max_sweeps`` the outer
    sweep budget.
    """

    a: np.ndarray
    rho: float
    tol: float = 1e-7
    max_sweeps: int = 500

    def __post_init__(self):
        arr = _input_matrix(self.a)
        if np.any(np.diag(arr) <= 0.0):
            raise ValueError("input matrix must have strictly positive diagonal")
        if self.rho < 0.0:
            raise ValueError("rho must be nonnegative")
        if self.tol <= 0.0 or self.max_sweeps < 1:
            raise ValueError("tol must be positive and max_sweeps >= 1")
        object.__setattr__(self, "a", arr)

    @property
    def dim(self) -> int:
        return self.a.shape[0]


@dataclass
class GlassoSolution:
    """Solver output: estimate, its inverse, and the convergence certificate."""

    theta: SpdMatrix
    w: SpdMatrix
    kkt_residual: float
    sweeps_used: int
    converged: bool
    objective_trace: list = field(default_factory=list, repr=False)


def _spd_inverse(arr: np.ndarray) -> np.ndarray:
    """Symmetric inverse through the Cholesky factor."""
    lower = cholesky(arr)
    lower_inv = np.linalg.inv(lower)
    inv = lower_inv.T @ lower_inv
    return 0.5 * (inv + inv.T)


def glasso_objective(a, rho: float, theta) -> float:
    """Penalized objective ``tr(A Theta) - log|Theta| + rho * off-l1``."""
    a = _input_matrix(a)
    theta_arr = theta.values if isinstance(theta, SymMatrix) else np.asarray(theta, float)
    off_l1 = float(np.sum(np.abs(theta_arr)) - np.sum(np.abs(np.diag(theta_arr))))
    return float(np.sum(a * theta_arr)) - log_det(theta_arr) + rho * off_l1


def kkt_residual(a, rho: float, theta) -> float:
    """Largest violation of the stationarity conditions at ``theta``.

    ``theta`` must be positive definite; its inverse is recomputed here,
    so the residual is an independent certificate of the solver output.
    """
    a = _input_matrix(a)
    theta_arr = theta.values if isinstance(theta, SymMatrix) else np.asarray(theta, float)
    w = _spd_inverse(theta_arr)
    gap = a - w
    d = a.shape[0]
    off = ~np.eye(d, dtype=bool)
    nonzero = off & (theta_arr != 0.0)
    zero = off & (theta_arr == 0.0)
    worst = float(np.max(np.abs(np.diag(gap)))) if d else 0.0
    if np.any(nonzero):
        worst = max(
            worst,
            float(np.max(np.abs(gap[nonzero] + rho * np.sign(theta_arr[nonzero])))),
        )
    if np.any(zero):
        worst = max(worst, float(np.max(np.abs(gap[zero]) - rho)))
    return max(worst, 0.0)


def _lasso_cd(m: np.ndarray, a12: np.ndarray, a22: float, rho: float,
              x0: np.ndarray, inner_tol: float):
    """Cyclic coordinate descent for the column subproblem.

    Minimizes ``a22 * x' M x + 2 a12' x + 2 rho ||x||_1`` starting from
    ``x0``; returns ``(x, M @ x)``.  Pure-Python inner loops: the
    subproblem dimension is small and sequential, so list arithmetic
    beats vectorized indexing here.
    """
    dim = x0.size
    if dim == 0:
        return x0, x0
    m_rows = m.tolist()
    a12_l = a12.tolist()
    x = x0.tolist()
    r = (m @ x0).tolist()
    for _ in range(_INNER_SWEEP_CAP):
        for k in range(dim):
            row = m_rows[k]
            mkk = row[k]
            if mkk <= 0.0:
                raise NotPositiveDefinite("conditional block lost positive definiteness")
            ck = a12_l[k] + a22 * (r[k] - mkk * x[k])
            if ck > rho:
                xn = -(ck - rho) / (a22 * mkk)
            elif ck < -rho:
                xn = -(ck + rho) / (a22 * mkk)
            else:
                xn = 0.0
            delta = xn - x[k]
            if delta != 0.0:
                x[k] = xn
                for l in range(dim):
                    r[l] += row[l] * delta
        worst = 0.0
        for k in range(dim):
            grad = a12_l[k] + a22 * r[k]
            xk = x[k]
            if xk > 0.0:
                viol = abs(grad + rho)
            elif xk < 0.0:
                viol = abs(grad - rho)
            else:
                viol = abs(grad) - rho
                if viol < 0.0:
                    viol = 0.0
            if viol > worst:
                worst = viol
        if worst <= inner_tol:
            break
    return np.asarray(x), np.asarray(r)


def glasso_solve(problem: GlassoProblem, warm_start=None) -> GlassoSolution:
    """Solve the penalized problem, optionally from a warm start.

    Parameters
    ----------
    problem : GlassoProblem
    warm_start : GlassoSolution, SpdMatrix or (d, d) array_like, optional
        Starting point for ``Theta`` (must be positive definite).  A warm
        start changes the iteration count, not the converged solution.

    Returns
    -------
    GlassoSolution
        ``converged`` is False when the sweep budget ran out; the best
        (last) iterate is still returned.

    Raises
    ------
    NotPositiveDefinite
        Only with ``rho = 0`` and a singular input: the unregularized
        problem is then ill-posed and is not silently fixed.
    """
    a = problem.a
    rho = float(problem.rho)
    tol = float(problem.tol)
    d = problem.dim

    if rho == 0.0 or d == 1:
        # Unpenalized (or trivially 1x1) problem: the inverse is exact.
        try:
            theta = _spd_inverse(a)
        except NotPositiveDefinite:
            raise NotPositiveDefinite(
                "rho = 0 with a singular input: the unpenalized problem "
                "has no positive definite minimizer"
            ) from None
        resid = kkt_residual(a, rho, theta)
        return GlassoSolution(
            theta=SpdMatrix(theta),
            w=SpdMatrix(a.copy()),
            kkt_residual=resid,
            sweeps_used=0,
            converged=True,
            objective_trace=[glasso_objective(a, rho, theta)],
        )

    if warm_start is None:
        theta = np.diag(1.0 / np.diag(a))
    else:
        if isinstance(warm_start, GlassoSolution):
            theta = warm_start.theta.values.copy()
        elif isinstance(warm_start, SymMatrix):
            theta = warm_start.values.copy()
        else:
            theta = np.array(warm_start, dtype=float)
        cholesky(theta)  # validate; raises NotPositiveDefinite

    inner_tol = tol / 10.0
    mask = np.ones(d, dtype=bool)
    trace: list = []
    resid = np.inf
    sweeps = 0
    converged = False
    for sweeps in range(1, problem.max_sweeps + 1):
        w = _spd_inverse(theta)
        for j in range(d):
            mask[j] = False
            w11 = w[np.ix_(mask, mask)]
            w12 = w[mask, j]
            w22 = w[j, j]
            m = w11 - np.outer(w12, w12) / w22
            a12 = a[mask, j]
            a22 = a[j, j]
            x, mx = _lasso_cd(m, a12, a22, rho, theta[mask, j].copy(), inner_tol)
            theta[mask, j] = x
            theta[j, mask] = x
            theta[j, j] = 1.0 / a22 + float(x @ mx)
            # Exact block inverse of the updated Theta.
            w[np.ix_(mask, mask)] = m + a22 * np.outer(mx, mx)
            w12_new = -a22 * mx
            w[mask, j] = w12_new
            w[j, mask] = w12_new
            w[j, j] = a22
            mask[j] = True
        trace.append(glasso_objective(a, rho, theta))
        resid = kkt_residual(a, rho, theta)
        if resid <= tol:
            converged = True
            break
    w_final = _spd_inverse(theta)
    return GlassoSolution(
        theta=SpdMatrix(theta),
        w=SpdMatrix(w_final),
        kkt_residual=float(resid),
        sweeps_used=sweeps,
        converged=converged,
        objective_trace=trace,
    )
