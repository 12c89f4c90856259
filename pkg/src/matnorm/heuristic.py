"""Closed-form sample-covariance estimators and oracle diagnostics.

For matrix observations with separable covariance, the pooled columns
give a direct estimator of the row covariance and the pooled rows give
one of the column covariance::

    sigma_hat = (1 / nq) sum_i Y_i Y_i'
    psi_hat   = (1 / (n tr(sigma_hat))) sum_i Y_i' Y_i

``sigma_hat`` is unbiased for ``sigma0`` under the ``trace(psi0) = q``
normalization; ``psi_hat`` factors exactly as ``t_h * psi_tilde`` with
``t_h = p / tr(sigma_hat)`` and ``psi_tilde = (1 / np) sum_i Y_i' Y_i``.
Neither estimator needs sparsity; their precision counterparts are plain
inverses and exist whenever the sample sizes make the estimates positive
definite (``nq >= p`` resp. ``np >= q`` almost surely).

``oracle_diagnostics`` evaluates, against a known ground-truth model,
the three oracle sample-covariance matrices that control the error
analysis of the penalized estimator::

    q1 = (1 / nq) sum_i Y_i Gamma0 Y_i'      vs. sigma0
    q2 = (1 / np) sum_i Y_i' Omega0 Y_i      vs. psi0
    s  = (1 / n)  sum_i vec(Y_i') vec(Y_i')' vs. sigma0 (x) psi0

together with their max entrywise deviations, raw and divided by the
theoretical scales ``sqrt(log p / nq)``, ``sqrt(log q / np)`` and
``sqrt(log pq / n)``.  The first uses the Gram identity
``(Y Gamma0^{1/2})(Y Gamma0^{1/2})' = Y Gamma0 Y'``, so no matrix square
root is formed.  ``s`` is ``pq x pq`` and is gated behind a size cap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateData, DimensionCap, NotPositiveDefinite, ShapeMismatch
from .linalg import cholesky, kron, max_abs_entry_diff
from .sampling import Dataset, TrueModel

__all__ = [
    "HeuristicEstimates",
    "OracleDiagnostics",
    "heuristic_sigma",
    "heuristic_psi",
    "heuristic_inverses",
    "oracle_diagnostics",
    "S_ENTRY_CAP",
]

#: Default cap on pq for forming the dense pq x pq matrix ``s``.
S_ENTRY_CAP = 4096


@dataclass
class HeuristicEstimates:
    """Closed-form covariance estimates and optional precision inverses.

    ``psi_hat == t_h * psi_tilde`` holds exactly by construction.
    ``omega_hat``/``gamma_hat`` stay ``None`` until
    :func:`heuristic_inverses` fills them.
    """

    sigma_hat: np.ndarray
    psi_hat: np.ndarray
    t_h: float
    psi_tilde: np.ndarray
    omega_hat: np.ndarray | None = None
    gamma_hat: np.ndarray | None = None


@dataclass
class OracleDiagnostics:
    """Oracle matrices and their deviations from the true covariances."""

    q1: np.ndarray
    q2: np.ndarray
    s: np.ndarray | None
    dev_q1: float
    dev_q2: float
    dev_s: float | None
    scaled_dev_q1: float | None
    scaled_dev_q2: float | None
    scaled_dev_s: float | None


def heuristic_sigma(data: Dataset) -> np.ndarray:
    """Row covariance estimate ``(1 / nq) sum_i Y_i Y_i'`` (symmetric PSD)."""
    y = data.samples
    acc = np.einsum("nij,nlj->il", y, y, optimize=True)
    acc /= data.n * data.q
    return 0.5 * (acc + acc.T)


def heuristic_psi(data: Dataset) -> HeuristicEstimates:
    """Column covariance estimate scaled by the row-estimate trace.

    Raises :class:`DegenerateData` when ``tr(sigma_hat) = 0`` (identically
    zero data), where the scaling is undefined.
    """
    sigma_hat = heuristic_sigma(data)
    trace = float(np.trace(sigma_hat))
    if trace <= 0.0:
        raise DegenerateData("tr(sigma_hat) = 0: data carry no signal")
    y = data.samples
    psi_tilde = np.einsum("nji,njl->il", y, y, optimize=True)
    psi_tilde /= data.n * data.p
    psi_tilde = 0.5 * (psi_tilde + psi_tilde.T)
    t_h = data.p / trace
    return HeuristicEstimates(
        sigma_hat=sigma_hat,
        psi_hat=t_h * psi_tilde,
        t_h=t_h,
        psi_tilde=psi_tilde,
    )


def heuristic_inverses(est: HeuristicEstimates) -> HeuristicEstimates:
    """Fill in the precision estimates ``sigma_hat^{-1}``, ``psi_hat^{-1}``.

    Raises :class:`NotPositiveDefinite` when either covariance estimate is
    singular, the signature of a degenerate sample-size regime
    (``nq < p`` or ``np < q``); no silent ridge repair is applied.
    """
    est.omega_hat = _chol_inverse(est.sigma_hat, "sigma_hat")
    est.gamma_hat = _chol_inverse(est.psi_hat, "psi_hat")
    return est


def _chol_inverse(mat: np.ndarray, name: str) -> np.ndarray:
    try:
        lower = cholesky(mat)
    except NotPositiveDefinite:
        raise NotPositiveDefinite(
            f"{name} is not positive definite; increase the sample size"
        ) from None
    lower_inv = np.linalg.inv(lower)
    inv = lower_inv.T @ lower_inv
    return 0.5 * (inv + inv.T)


def oracle_diagnostics(data: Dataset, model: TrueModel, include_s: bool = False,
                       s_cap: int = S_ENTRY_CAP) -> OracleDiagnostics:
    """Oracle sample-covariance matrices and their entrywise deviations.

    ``include_s`` additionally forms the ``pq x pq`` vectorized sample
    covariance; refused with :class:`DimensionCap` when ``pq > s_cap``.
    Scaled deviations are ``None`` when the corresponding log scale is
    not positive (``p < 2``, ``q < 2`` or ``pq < 2``).
    """
    if (data.p, data.q) != (model.p, model.q):
        raise ShapeMismatch(
            f"dataset is {data.p} x {data.q}, model is {model.p} x {model.q}"
        )
    n, p, q = data.n, data.p, data.q
    y = data.samples

    q1 = np.einsum("nij,jk,nlk->il", y, model.gamma0.values, y, optimize=True)
    q1 /= n * q
    q1 = 0.5 * (q1 + q1.T)
    q2 = np.einsum("nji,jk,nkl->il", y, model.omega0.values, y, optimize=True)
    q2 /= n * p
    q2 = 0.5 * (q2 + q2.T)

    dev_q1 = max_abs_entry_diff(q1, model.sigma0.values)
    dev_q2 = max_abs_entry_diff(q2, model.psi0.values)

    s = None
    dev_s = None
    if include_s:
        if p * q > s_cap:
            raise DimensionCap(f"pq = {p * q} exceeds the s cap {s_cap}")
        # vec is column stacking, so vec(Y') enumerates Y row-major.
        vecs = y.reshape(n, p * q)
        s = vecs.T @ vecs / n
        s = 0.5 * (s + s.T)
        target = kron(model.sigma0.values, model.psi0.values,
                      entry_cap=s_cap * s_cap)
        dev_s = max_abs_entry_diff(s, target)

    scaled_q1 = dev_q1 / math.sqrt(math.log(p) / (n * q)) if p >= 2 else None
    scaled_q2 = dev_q2 / math.sqrt(math.log(q) / (n * p)) if q >= 2 else None
    scaled_s = None
    if dev_s is not None and p * q >= 2:
        scaled_s = dev_s / math.sqrt(math.log(p * q) / n)
    return OracleDiagnostics(
        q1=q1,
        q2=q2,
        s=s,
        dev_q1=dev_q1,
        dev_q2=dev_q2,
        dev_s=dev_s,
        scaled_dev_q1=scaled_q1,
        scaled_dev_q2=scaled_q2,
        scaled_dev_s=scaled_s,
    )
