"""Dense symmetric linear algebra used throughout the package.

Factorizations and eigenvalue computations are delegated to LAPACK through
``numpy.linalg``; this module adds the validated matrix types, the error
mapping, and the small Kronecker/vec utilities the estimation and
diagnostic code relies on.

Conventions
-----------
* ``vec`` always means column stacking, so ``(A (x) B) vec(X) = vec(B X A^T)``.
* Eigenvalues are reported in ascending order.
* All types are immutable after construction and safe to share across
  concurrent tasks.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionCap, NoConvergence, NotPositiveDefinite, ShapeMismatch

__all__ = [
    "SymMatrix",
    "SpdMatrix",
    "cholesky",
    "log_det",
    "sym_eigen",
    "spectral_norm",
    "frobenius_norm",
    "kron",
    "max_abs_entry_diff",
    "KRON_ENTRY_CAP",
]

#: Relative entrywise tolerance below which an almost-symmetric input is
#: silently symmetrized; larger asymmetry is rejected.
SYMMETRY_TOL = 1e-12

#: Default cap on the number of entries a Kronecker product may have.
KRON_ENTRY_CAP = 1 << 24


def _as_matrix(a) -> np.ndarray:
    """Return the dense ndarray behind ``a`` (wrapper type or array-like)."""
    if isinstance(a, SymMatrix):
        return a.values
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2:
        raise ShapeMismatch(f"expected a 2-d matrix, got shape {arr.shape}")
    return arr


class SymMatrix:
    """Immutable dense symmetric matrix.

    Inputs whose asymmetry is within ``SYMMETRY_TOL`` (relative, entrywise)
    are symmetrized as ``(A + A^T) / 2`` on construction; anything farther
    from symmetric is rejected.  Entries must be finite.
    """

    __slots__ = ("_values",)

    def __init__(self, values):
        arr = np.array(values, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ShapeMismatch(f"expected a square matrix, got shape {arr.shape}")
        if arr.size and not np.all(np.isfinite(arr)):
            raise ValueError("matrix entries must be finite")
        gap = np.abs(arr - arr.T)
        allowed = SYMMETRY_TOL * np.maximum(1.0, np.abs(arr))
        if np.any(gap > allowed):
            worst = float(np.max(gap))
            raise ValueError(f"matrix is not symmetric (max |A - A^T| = {worst:.3e})")
        sym = 0.5 * (arr + arr.T)
        sym.setflags(write=False)
        self._values = sym

    @property
    def values(self) -> np.ndarray:
        """Read-only ndarray of the entries."""
        return self._values

    @property
    def dim(self) -> int:
        return self._values.shape[0]

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim})"


class SpdMatrix(SymMatrix):
    """Symmetric positive definite matrix, validated by Cholesky.

    The lower-triangular Cholesky factor is computed on construction and
    cached; :func:`cholesky` returns it without refactorizing.
    """

    __slots__ = ("_chol",)

    def __init__(self, values):
        super().__init__(values)
        try:
            chol = np.linalg.cholesky(self._values)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefinite(
                f"Cholesky factorization failed: {exc}"
            ) from None
        chol.setflags(write=False)
        self._chol = chol

    @property
    def chol(self) -> np.ndarray:
        """Cached lower-triangular Cholesky factor ``L`` with ``L L^T = A``."""
        return self._chol


def cholesky(m) -> np.ndarray:
    """Lower-triangular Cholesky factor of a positive definite matrix.

    Parameters
    ----------
    m : SpdMatrix, SymMatrix or (d, d) array_like
        Matrix to factor.  Raw arrays are factored directly.

    Returns
    -------
    L : (d, d) ndarray
        Lower-triangular factor with ``L @ L.T == m``.

    Raises
    ------
    NotPositiveDefinite
        If a pivot is non-positive (the input is not positive definite).
    """
    if isinstance(m, SpdMatrix):
        return m.chol
    arr = _as_matrix(m)
    try:
        return np.linalg.cholesky(arr)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"Cholesky factorization failed: {exc}") from None


def log_det(m) -> float:
    """Log-determinant of a positive definite matrix via its Cholesky factor.

    Computed as ``2 * sum(log(diag(L)))``, which is exact for positive
    definite inputs and propagates :class:`NotPositiveDefinite` otherwise.
    """
    chol_factor = cholesky(m)
    return float(2.0 * np.sum(np.log(np.diag(chol_factor))))


def sym_eigen(m):
    """Full symmetric eigendecomposition.

    Parameters
    ----------
    m : SymMatrix or (d, d) array_like

    Returns
    -------
    eigenvalues : (d,) ndarray
        Sorted ascending.
    eigenvectors : (d, d) ndarray
        Orthonormal, column ``k`` pairs with ``eigenvalues[k]``.

    Raises
    ------
    NoConvergence
        If the underlying iterative scheme fails to converge.
    """
    arr = _as_matrix(m)
    if arr.shape[0] < 1:
        raise ShapeMismatch("eigendecomposition needs dim >= 1")
    try:
        eigenvalues, eigenvectors = np.linalg.eigh(arr)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(f"symmetric eigensolver failed: {exc}") from None
    return eigenvalues, eigenvectors


def spectral_norm(m) -> float:
    """Largest absolute eigenvalue of a symmetric matrix."""
    eigenvalues, _ = sym_eigen(m)
    return float(np.max(np.abs(eigenvalues)))


def frobenius_norm(a) -> float:
    """Square root of the sum of squared entries of a dense matrix."""
    arr = np.asarray(a, dtype=float)
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError("matrix entries must be finite")
    return float(np.sqrt(np.sum(arr * arr)))


def kron(a, b, entry_cap: int | None = None) -> np.ndarray:
    """Kronecker product ``a (x) b`` with a memory cap.

    Parameters
    ----------
    a, b : array_like
        Dense matrices.
    entry_cap : int, optional
        Maximum number of entries of the result; defaults to
        ``KRON_ENTRY_CAP``.

    Raises
    ------
    DimensionCap
        If the product would have more than ``entry_cap`` entries.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    cap = KRON_ENTRY_CAP if entry_cap is None else int(entry_cap)
    n_entries = a.shape[0] * b.shape[0] * a.shape[1] * b.shape[1]
    if n_entries > cap:
        raise DimensionCap(
            f"Kronecker product would have {n_entries} entries (cap {cap})"
        )
    return np.kron(a, b)


def max_abs_entry_diff(a, b) -> float:
    """Largest absolute entrywise difference ``max_ij |a_ij - b_ij|``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ShapeMismatch(f"shapes differ: {a.shape} vs {b.shape}")
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - b)))
