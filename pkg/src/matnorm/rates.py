"""Monte-Carlo harness for empirical convergence-rate experiments.

A *cell* fixes ``(n, p, q, sparsity, penalties)`` and runs seeded
replicates: regenerate data, fit the requested estimators, record the
error statistics exactly as the rate theory scales them,

* penalized fit: ``||Omega_hat - Omega0||_F^2 / p`` and
  ``||Gamma_hat - Gamma0||_F^2 / q`` (plus a scale-aligned variant using
  the ``c`` minimizing ``||c Omega_hat - Omega0||_F``, reported as a
  supplementary column since finite-sample penalties only weakly pin the
  overall scale);
* closed-form estimators: spectral-norm errors of the covariance and
  precision estimates.

The theoretical predictors attached to each cell are::

    smgm_omega : (1 + s1/p) log(p) / (n q)
    smgm_gamma : (1 + s2/q) log(q) / (n p)
    heur_sigma : sqrt(max(p, log n) / (n q))
    heur_psi   : sqrt(max(max(p, log n)/(n q), max(q, log n)/(n p)))

Replicate seeds are ``derive_seed(base_seed, n, p, q, r)``, so adding
cells or replicates never perturbs existing streams, and identical
configurations reproduce bit-identical results regardless of the worker
count.  Failed replicates (singular closed-form inverses, non-converged
fits) are counted, not fatal.

Note on what is measured: the penalized-estimator columns report the
alternating-minimization iterate reached from the configured
initialization, which is a stationary point of the objective but is not
certified to be any particular local minimizer.

``check_assumptions`` evaluates, over a grid of ``(n, p, q, s1, s2,
lambda1, lambda2)`` points, every expression appearing in the regularity
conditions of the rate theory, and flags whether each sequence is
non-increasing along the grid ordering.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    DegenerateData,
    DomainError,
    IllPosed,
    InsufficientData,
    NoConvergence,
    NotPositiveDefinite,
)
from .heuristic import heuristic_inverses, heuristic_psi
from .linalg import frobenius_norm, spectral_norm
from .rng import derive_seed
from .sampling import TrueModel, make_true_model, sample_matrix_normal
from .smgm import PenaltyConfig, smgm_fit

__all__ = [
    "ModelSpec",
    "RateCell",
    "RatePredictors",
    "SlopeFit",
    "RateReport",
    "AssumptionPoint",
    "AssumptionValues",
    "AssumptionReport",
    "run_cell",
    "rate_predictors",
    "fit_rate_slope",
    "check_assumptions",
    "scale_aligned_error",
]

ERROR_METRICS = (
    "smgm_omega",
    "smgm_gamma",
    "smgm_omega_aligned",
    "smgm_gamma_aligned",
    "heur_sigma",
    "heur_psi",
    "heur_omega",
    "heur_gamma",
)

#: Cells enter slope regressions only with at least this success fraction.
MIN_SUCCESS_FRACTION = 0.8


@dataclass(frozen=True)
class ModelSpec:
    """Recipe for a ground-truth model (kept picklable for workers)."""

    p: int
    q: int
    design: object
    tau1: float
    seed: int = 0

    def build(self) -> TrueModel:
        return make_true_model(self.p, self.q, self.design, self.tau1, self.seed)


@dataclass
class RateCell:
    """Replicate-level errors and predictors for one grid point."""

    n: int
    p: int
    q: int
    s1: int = 0
    s2: int = 0
    lambda1: float = 0.0
    lambda2: float = 0.0
    replicates: int = 0
    errors_smgm_omega: list = field(default_factory=list)
    errors_smgm_gamma: list = field(default_factory=list)
    errors_smgm_omega_aligned: list = field(default_factory=list)
    errors_smgm_gamma_aligned: list = field(default_factory=list)
    errors_heur_sigma: list = field(default_factory=list)
    errors_heur_psi: list = field(default_factory=list)
    errors_heur_omega: list = field(default_factory=list)
    errors_heur_gamma: list = field(default_factory=list)
    predictor_smgm_omega: float = 0.0
    predictor_smgm_gamma: float = 0.0
    predictor_heur_sigma: float = 0.0
    predictor_heur_psi: float = 0.0
    failed_replicates: int = 0
    base_seed: int = 0
    cell_id: str = ""
    replicate_ids: list = field(default_factory=list)
    replicate_seeds: list = field(default_factory=list)

    def errors(self, metric: str) -> list:
        if metric not in ERROR_METRICS:
            raise KeyError(f"unknown error metric {metric!r}")
        return getattr(self, f"errors_{metric}")

    def predictor(self, metric: str) -> float:
        base = metric.replace("_aligned", "")
        if base in ("heur_omega", "heur_gamma"):
            # Precision estimates converge at the same spectral rates as
            # the covariance estimates they invert.
            base = {"heur_omega": "heur_sigma", "heur_gamma": "heur_psi"}[base]
        return getattr(self, f"predictor_{base}")

    def axis_value(self, axis: str) -> float:
        if axis not in ("n", "p", "q"):
            raise KeyError(f"unknown axis {axis!r}")
        return float(getattr(self, axis))


@dataclass(frozen=True)
class RatePredictors:
    smgm_omega: float
    smgm_gamma: float
    heur_sigma: float
    heur_psi: float


@dataclass(frozen=True)
class SlopeFit:
    """Log-log least-squares fit of an error statistic on a grid axis."""

    axis: str
    metric: str
    statistic: str
    slope: float
    intercept: float
    r_squared: float
    n_cells: int


@dataclass
class RateReport:
    cells: list
    slope_fits: list
    verdicts: dict


def rate_predictors(n: int, p: int, q: int, s1: int, s2: int) -> RatePredictors:
    """Evaluate the four theoretical error predictors (natural log)."""
    if p < 2 or q < 2 or n < 2:
        raise DomainError("rate predictors need n, p, q >= 2")
    if s1 < 0 or s2 < 0:
        raise DomainError("sparsity counts must be nonnegative")
    log_n = math.log(n)
    row_ratio = max(p, log_n) / (n * q)
    col_ratio = max(q, log_n) / (n * p)
    return RatePredictors(
        smgm_omega=(1.0 + s1 / p) * math.log(p) / (n * q),
        smgm_gamma=(1.0 + s2 / q) * math.log(q) / (n * p),
        heur_sigma=math.sqrt(row_ratio),
        heur_psi=math.sqrt(max(row_ratio, col_ratio)),
    )


def scale_aligned_error(estimate: np.ndarray, truth: np.ndarray) -> float:
    """``min_c ||c * estimate - truth||_F``, squared and per-dimension."""
    num = float(np.sum(estimate * truth))
    den = float(np.sum(estimate * estimate))
    c = num / den if den > 0 else 0.0
    return frobenius_norm(c * estimate - truth) ** 2 / truth.shape[0]


def _run_replicate(model: TrueModel, n: int, penalty: PenaltyConfig,
                   estimators, seed: int, fit_kwargs: dict) -> dict | None:
    """One replicate; returns metric dict, or None on a counted failure."""
    data = sample_matrix_normal(model, n, seed)
    out: dict = {}
    try:
        if "smgm" in estimators:
            fit = smgm_fit(data, penalty, **fit_kwargs)
            if not fit.converged:
                raise NoConvergence("alternating minimization hit its budget")
            omega0 = model.omega0.values
            gamma0 = model.gamma0.values
            omega_hat = fit.omega_hat.values
            gamma_hat = fit.gamma_hat.values
            out["smgm_omega"] = frobenius_norm(omega_hat - omega0) ** 2 / model.p
            out["smgm_gamma"] = frobenius_norm(gamma_hat - gamma0) ** 2 / model.q
            out["smgm_omega_aligned"] = scale_aligned_error(omega_hat, omega0)
            out["smgm_gamma_aligned"] = scale_aligned_error(gamma_hat, gamma0)
        if "heuristic" in estimators:
            est = heuristic_inverses(heuristic_psi(data))
            out["heur_sigma"] = spectral_norm(est.sigma_hat - model.sigma0.values)
            out["heur_psi"] = spectral_norm(est.psi_hat - model.psi0.values)
            out["heur_omega"] = spectral_norm(est.omega_hat - model.omega0.values)
            out["heur_gamma"] = spectral_norm(est.gamma_hat - model.gamma0.values)
    except (NotPositiveDefinite, IllPosed, NoConvergence, DegenerateData):
        return None
    return out


def _replicate_task(payload):
    spec, n, lambda1, lambda2, estimators, seed, fit_kwargs, index = payload
    model = spec.build()
    penalty = PenaltyConfig(lambda1=lambda1, lambda2=lambda2)
    return index, _run_replicate(model, n, penalty, estimators, seed, fit_kwargs)


def run_cell(model_spec: ModelSpec, n: int, penalty: PenaltyConfig,
             replicates: int, estimators, base_seed: int,
             workers: int = 1, fit_kwargs: dict | None = None,
             cell_id: str = "") -> RateCell:
    """Run one grid cell and collect its error lists.

    ``estimators`` is a subset of ``{"smgm", "heuristic"}``.  Replicate
    ``r`` regenerates its dataset from ``derive_seed(base_seed, n, p, q,
    r)``.  Failures are counted in ``failed_replicates`` and contribute
    to no error list, so every recorded list has length
    ``replicates - failed_replicates``.
    """
    estimators = frozenset(estimators)
    if not estimators <= {"smgm", "heuristic"}:
        raise ConfigError(f"unknown estimators {sorted(estimators)}")
    if replicates < 1:
        raise ConfigError("replicates must be >= 1")
    fit_kwargs = dict(fit_kwargs or {})
    try:
        model = model_spec.build()
    except Exception as exc:
        raise ConfigError(f"infeasible model spec: {exc}") from exc
    p, q = model.p, model.q
    predictors = rate_predictors(n, p, q, model.s1, model.s2)
    cell = RateCell(
        n=n, p=p, q=q, s1=model.s1, s2=model.s2,
        lambda1=penalty.lambda1, lambda2=penalty.lambda2,
        replicates=replicates,
        predictor_smgm_omega=predictors.smgm_omega,
        predictor_smgm_gamma=predictors.smgm_gamma,
        predictor_heur_sigma=predictors.heur_sigma,
        predictor_heur_psi=predictors.heur_psi,
        base_seed=base_seed,
        cell_id=cell_id or f"n{n}_p{p}_q{q}",
    )
    seeds = [derive_seed(base_seed, n, p, q, r) for r in range(replicates)]

    results: list = [None] * replicates
    if workers > 1:
        payloads = [
            (model_spec, n, penalty.lambda1, penalty.lambda2, estimators,
             seeds[r], fit_kwargs, r)
            for r in range(replicates)
        ]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for index, outcome in pool.map(_replicate_task, payloads):
                results[index] = outcome
    else:
        for r in range(replicates):
            results[r] = _run_replicate(
                model, n, penalty, estimators, seeds[r], fit_kwargs
            )

    for r in range(replicates):
        outcome = results[r]
        if outcome is None:
            cell.failed_replicates += 1
            continue
        cell.replicate_ids.append(r)
        cell.replicate_seeds.append(seeds[r])
        for metric, value in outcome.items():
            cell.errors(metric).append(float(value))
    return cell


def fit_rate_slope(cells, axis: str, metric: str,
                   statistic: str = "mean") -> SlopeFit:
    """Ordinary least squares of ``log(statistic of errors)`` on
    ``log(axis value)`` across cells.

    Cells with fewer than 80% successful replicates, or without data for
    the metric, are dropped; at least three usable cells with a strictly
    monotone axis are required.
    """
    if statistic not in ("mean", "median"):
        raise ConfigError(f"unknown statistic {statistic!r}")
    points = []
    for cell in cells:
        if cell.replicates <= 0:
            continue
        success = (cell.replicates - cell.failed_replicates) / cell.replicates
        if success < MIN_SUCCESS_FRACTION:
            continue
        errors = cell.errors(metric)
        if not errors:
            continue
        stat = float(np.mean(errors)) if statistic == "mean" else float(np.median(errors))
        if stat <= 0.0:
            continue
        points.append((cell.axis_value(axis), stat))
    if len(points) < 3:
        raise InsufficientData(
            f"need >= 3 usable cells for metric {metric!r}, have {len(points)}"
        )
    xs = np.array([pt[0] for pt in points])
    diffs = np.diff(xs)
    if not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise InsufficientData(f"axis {axis!r} is not strictly monotone across cells")
    log_x = np.log(xs)
    log_y = np.log([pt[1] for pt in points])
    slope, intercept = np.polyfit(log_x, log_y, 1)
    fitted = slope * log_x + intercept
    ss_res = float(np.sum((log_y - fitted) ** 2))
    ss_tot = float(np.sum((log_y - np.mean(log_y)) ** 2))
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return SlopeFit(
        axis=axis,
        metric=metric,
        statistic=statistic,
        slope=float(slope),
        intercept=float(intercept),
        r_squared=r_squared,
        n_cells=len(points),
    )


@dataclass(frozen=True)
class AssumptionPoint:
    n: int
    p: int
    q: int
    s1: int
    s2: int
    lambda1: float
    lambda2: float

    def __post_init__(self):
        if self.p < 2 or self.q < 2 or self.n < 1:
            raise DomainError("assumption expressions need p, q >= 2 and n >= 1")
        if self.s1 < 0 or self.s2 < 0:
            raise DomainError("sparsity counts must be nonnegative")
        if self.lambda1 <= 0.0 or self.lambda2 <= 0.0:
            raise DomainError("assumption expressions need strictly positive penalties")


@dataclass(frozen=True)
class AssumptionValues:
    """Every regularity expression evaluated at one grid point."""

    a1_row: float
    a1_col: float
    a3_bound1: float
    a3_bound2: float
    a3_ratio1: float
    a3_ratio2: float
    a4_val1: float
    a4_val2: float
    r_n: float
    r_n_prime: float
    a5_row: float
    a5_col: float
    a5: float
    h2_row: float
    h2_col: float


@dataclass
class AssumptionReport:
    points: list
    values: list
    verdicts: dict


#: Sequences whose limits are required to vanish (or, for the penalty
#: levels and their ceilings, to shrink) along a valid scaling; the
#: verdicts flag non-increase along the grid ordering.
MONOTONE_SEQUENCES = (
    "a1_row",
    "a1_col",
    "lambda1",
    "lambda2",
    "a3_bound1",
    "a3_bound2",
    "a4_val1",
    "a4_val2",
    "a5",
    "h2_row",
    "h2_col",
)

#: Geometric decay factor accepted by the penalty/ceiling convergence test.
A3_DECAY_FACTOR = 0.9


def _assumption_values(pt: AssumptionPoint) -> AssumptionValues:
    n, p, q = pt.n, pt.p, pt.q
    s1, s2 = pt.s1, pt.s2
    lam1, lam2 = pt.lambda1, pt.lambda2
    log_p, log_q = math.log(p), math.log(q)
    log_pq = math.log(p * q)
    log_n = math.log(n)
    a1_row = (p + s1) * log_p / (n * q)
    a1_col = (q + s2) * log_q / (n * p)
    a3_bound1 = math.sqrt(1.0 + p / (s1 + 1)) * math.sqrt(log_p / (n * q)) / p
    a3_bound2 = math.sqrt(1.0 + q / (s2 + 1)) * math.sqrt(log_q / (n * p)) / q
    a4_val1 = log_p / (lam1 ** 2 * p ** 2 * n * q)
    a4_val2 = log_q / (lam2 ** 2 * q ** 2 * n * p)
    r_n = max(
        1.0,
        s2 / q,
        s1 * q / p,
        (q + s2) * log_q / (lam1 ** 2 * n * p ** 3),
        (p + s1) * log_p / (lam2 ** 2 * n * p * q ** 3),
    )
    r_n_prime = max(
        1.0,
        s1 / p,
        s2 * p / q,
        (q + s2) * log_q / (lam1 ** 2 * n * q * p ** 3),
        (p + s1) * log_p / (lam2 ** 2 * n * q ** 3),
    )
    a5_row = r_n * log_pq / n
    a5_col = r_n_prime * log_pq / n
    return AssumptionValues(
        a1_row=a1_row,
        a1_col=a1_col,
        a3_bound1=a3_bound1,
        a3_bound2=a3_bound2,
        a3_ratio1=lam1 / a3_bound1,
        a3_ratio2=lam2 / a3_bound2,
        a4_val1=a4_val1,
        a4_val2=a4_val2,
        r_n=r_n,
        r_n_prime=r_n_prime,
        a5_row=a5_row,
        a5_col=a5_col,
        a5=min(a5_row, a5_col),
        h2_row=max(p, log_n) / (q * n),
        h2_col=max(q, log_n) / (p * n),
    )


def _non_increasing(values) -> bool:
    return all(
        later <= earlier * (1.0 + 1e-12) + 1e-300
        for earlier, later in zip(values, values[1:])
    )


def _ratio_converging(ratios) -> bool:
    """Scale-free divergence test for the penalty/ceiling headroom ratios.

    Under a valid tuning schedule the ratio ``lambda / ceiling`` stays
    bounded (it may increase toward its constant), whereas a fixed
    ``lambda`` against a shrinking ceiling diverges.  On a finite grid we
    accept a non-increasing sequence, or one whose increments decay
    geometrically (factor :data:`A3_DECAY_FACTOR`); anything with growing
    increments is flagged.  At least three grid points are needed to see
    decay, so a two-point increasing sequence is flagged as well.
    """
    if len(ratios) < 2:
        return True
    slack = 1e-12 * max(abs(r) for r in ratios) + 1e-300
    if all(b <= a + slack for a, b in zip(ratios, ratios[1:])):
        return True
    increments = [b - a for a, b in zip(ratios, ratios[1:])]
    if len(increments) < 2:
        return False
    return all(
        nxt <= A3_DECAY_FACTOR * max(cur, 0.0) + slack
        for cur, nxt in zip(increments, increments[1:])
    )


def check_assumptions(grid) -> AssumptionReport:
    """Evaluate all regularity expressions over a grid of points.

    ``grid`` is an iterable of :class:`AssumptionPoint` or of mappings
    with the same keys.  Verdicts: for every vanishing-sequence
    expression, True when the sequence is non-increasing along the grid
    ordering; for the penalty headroom ratios ``a3_ratio1/2``, True when
    the sequence passes the convergence test of :func:`_ratio_converging`.
    """
    points = []
    for entry in grid:
        if isinstance(entry, AssumptionPoint):
            points.append(entry)
        else:
            points.append(AssumptionPoint(**dict(entry)))
    if not points:
        raise DomainError("empty assumption grid")
    values = [_assumption_values(pt) for pt in points]
    verdicts = {}
    for name in MONOTONE_SEQUENCES:
        if name in ("lambda1", "lambda2"):
            seq = [getattr(pt, name) for pt in points]
        else:
            seq = [getattr(v, name) for v in values]
        verdicts[name] = _non_increasing(seq)
    for name in ("a3_ratio1", "a3_ratio2"):
        verdicts[name] = _ratio_converging([getattr(v, name) for v in values])
    return AssumptionReport(points=points, values=values, verdicts=verdicts)
