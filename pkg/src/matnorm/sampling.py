"""Ground-truth Kronecker models and matrix-variate normal sampling.

A :class:`TrueModel` holds a pair of covariance matrices ``(sigma0, psi0)``
with their inverses ``(omega0, gamma0)``, the sparsity pattern of the
precision matrices, and the eigenvalue corridor parameter ``tau1``:

* every eigenvalue of ``sigma0`` and ``psi0`` lies strictly inside
  ``(tau1, 1/tau1)``;
* ``trace(psi0) == q`` (the scale of the pair is pinned to the column
  covariance, resolving the ``(c * sigma, psi / c)`` ambiguity).

Observations are ``p x q`` matrices ``Y_i = L_sigma Z_i L_psi^T`` with
``Z_i`` filled row-major from a seeded :mod:`matnorm.rng` stream and
``L_sigma, L_psi`` the lower Cholesky factors of the two covariances, so
``cov(vec(Y)) = psi0 (x) sigma0`` (column-stacking ``vec``).

Dataset files
-------------
``write_dataset`` produces a plain-text format::

    matnorm-dataset,1
    n,p,q,seed,model_id
    <n>,<p>,<q>,<seed>,<model_id or empty>
    ... n blocks of p comma-separated rows (q values, %.17g) ...

Floats are written with 17 significant digits, so a read/write round trip
is exact and repeated runs are byte-identical.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InfeasibleDesign, ShapeMismatch
from .linalg import SpdMatrix, sym_eigen
from .rng import NormalStream, derive_seed, raw_outputs, standard_normal_stream

__all__ = [
    "Banded",
    "RandomSupport",
    "TrueModel",
    "Dataset",
    "make_true_model",
    "sample_matrix_normal",
    "standard_normal_stream",
    "write_dataset",
    "read_dataset",
    "DATASET_FORMAT_VERSION",
]

DATASET_FORMAT_VERSION = 1

#: Fraction of the corridor width kept as a safety margin when shifting
#: precision eigenvalues into (tau1, 1/tau1).
CORRIDOR_MARGIN = 0.05


@dataclass(frozen=True)
class Banded:
    """Banded precision design: diagonal 1, value ``-strength`` on the
    first ``bandwidth`` sub/super-diagonals (both row and column side)."""

    bandwidth: int
    strength: float


@dataclass(frozen=True)
class RandomSupport:
    """Random symmetric support design with ``s1`` (row) and ``s2``
    (column) off-diagonal nonzeros of magnitude ``strength`` and seeded
    random signs.  ``s1`` and ``s2`` count ordered pairs, so they must be
    even."""

    s1: int
    s2: int
    strength: float


def _off_diagonal_support(precision: np.ndarray) -> frozenset:
    rows, cols = np.nonzero(precision)
    return frozenset(
        (int(i), int(j)) for i, j in zip(rows, cols) if i != j
    )


@dataclass(frozen=True)
class TrueModel:
    """Ground-truth matrix-normal model; validated on construction."""

    p: int
    q: int
    sigma0: SpdMatrix
    psi0: SpdMatrix
    omega0: SpdMatrix
    gamma0: SpdMatrix
    s1: int
    s2: int
    support1: frozenset
    support2: frozenset
    tau1: float

    def __post_init__(self):
        if not 0.0 < self.tau1 < 1.0:
            raise ValueError("tau1 must lie in (0, 1)")
        if self.sigma0.dim != self.p or self.omega0.dim != self.p:
            raise ShapeMismatch("row matrices must be p x p")
        if self.psi0.dim != self.q or self.gamma0.dim != self.q:
            raise ShapeMismatch("column matrices must be q x q")
        eye_p = np.eye(self.p)
        eye_q = np.eye(self.q)
        if np.max(np.abs(self.sigma0.values @ self.omega0.values - eye_p)) > 1e-8:
            raise ValueError("sigma0 and omega0 are not inverses")
        if np.max(np.abs(self.psi0.values @ self.gamma0.values - eye_q)) > 1e-8:
            raise ValueError("psi0 and gamma0 are not inverses")
        trace_psi = float(np.trace(self.psi0.values))
        if abs(trace_psi - self.q) > 1e-10 * self.q:
            raise ValueError(f"trace(psi0) = {trace_psi!r}, expected q = {self.q}")
        lo, hi = self.tau1, 1.0 / self.tau1
        for name, mat in (("sigma0", self.sigma0), ("psi0", self.psi0)):
            eigenvalues, _ = sym_eigen(mat)
            if eigenvalues[0] <= lo or eigenvalues[-1] >= hi:
                raise ValueError(
                    f"eigenvalues of {name} leave the corridor "
                    f"({lo:.6g}, {hi:.6g}): range "
                    f"[{eigenvalues[0]:.6g}, {eigenvalues[-1]:.6g}]"
                )
        for support, mat in ((self.support1, self.omega0), (self.support2, self.gamma0)):
            if any((j, i) not in support for (i, j) in support):
                raise ValueError("support sets must be symmetric")
            if support != _off_diagonal_support(mat.values):
                raise ValueError("support set does not match the precision pattern")
        if self.s1 != len(self.support1) or self.s2 != len(self.support2):
            raise ValueError("s1/s2 must equal the off-diagonal nonzero counts")

    def digest(self) -> str:
        """Short stable identifier of this model (ties datasets to it)."""
        h = hashlib.sha256()
        h.update(np.array([self.p, self.q], dtype=np.int64).tobytes())
        h.update(np.float64(self.tau1).tobytes())
        for mat in (self.omega0, self.gamma0, self.sigma0, self.psi0):
            h.update(np.ascontiguousarray(mat.values).tobytes())
        return h.hexdigest()[:12]


@dataclass(frozen=True)
class Dataset:
    """``n`` replicate ``p x q`` observations plus shape/seed metadata."""

    n: int
    p: int
    q: int
    samples: np.ndarray = field(repr=False)
    seed: int
    model_id: str | None = None

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float)
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if arr.shape != (self.n, self.p, self.q):
            raise ShapeMismatch(
                f"samples have shape {arr.shape}, expected {(self.n, self.p, self.q)}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("samples must be finite")
        arr = arr.copy() if arr is not self.samples else arr
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)


def _raw_precision(dim: int, design, seed: int, side: int) -> np.ndarray:
    """Unshifted precision matrix for one side of the model."""
    precision = np.eye(dim)
    if isinstance(design, Banded):
        if not 0 <= design.bandwidth < dim:
            raise InfeasibleDesign(
                f"bandwidth {design.bandwidth} infeasible for dimension {dim}"
            )
        for k in range(1, design.bandwidth + 1):
            idx = np.arange(dim - k)
            precision[idx, idx + k] = -design.strength
            precision[idx + k, idx] = -design.strength
        return precision
    if isinstance(design, RandomSupport):
        count = design.s1 if side == 1 else design.s2
        if count % 2 != 0:
            raise InfeasibleDesign("off-diagonal counts must be even (symmetry)")
        if not 0 <= count <= dim * (dim - 1):
            raise InfeasibleDesign(
                f"{count} off-diagonal nonzeros infeasible for dimension {dim}"
            )
        n_pairs = count // 2
        upper = [(i, j) for i in range(dim) for j in range(i + 1, dim)]
        keys = raw_outputs(seed, 0, len(upper))
        order = np.argsort(keys, kind="stable")
        for rank in order[:n_pairs]:
            i, j = upper[int(rank)]
            sign = 1.0 if int(keys[int(rank)]) & 1 else -1.0
            precision[i, j] = precision[j, i] = sign * design.strength
        return precision
    raise InfeasibleDesign(f"unknown design {design!r}")


def _shift_into_corridor(precision: np.ndarray, tau1: float) -> np.ndarray:
    """Add a diagonal shift so all eigenvalues land in the target corridor."""
    margin = CORRIDOR_MARGIN * (1.0 / tau1 - tau1)
    lo = tau1 + margin
    hi = 1.0 / tau1 - margin
    eigenvalues = np.linalg.eigvalsh(precision)
    c_min = lo - eigenvalues[0]
    c_max = hi - eigenvalues[-1]
    if c_min > c_max:
        raise InfeasibleDesign(
            f"eigenvalue spread {eigenvalues[-1] - eigenvalues[0]:.6g} exceeds "
            f"the corridor [{lo:.6g}, {hi:.6g}]; no diagonal shift can fix it"
        )
    shift = 0.0 if c_min <= 0.0 <= c_max else (c_min if c_min > 0.0 else c_max)
    return precision + shift * np.eye(precision.shape[0])


def make_true_model(p: int, q: int, design, tau1: float, seed: int = 0) -> TrueModel:
    """Build a ground-truth model for the given sparsity design.

    Construction order: raw precision -> diagonal shift into the
    eigenvalue corridor -> invert -> rescale the column covariance so
    ``trace(psi0) == q`` (the row covariance is left unchanged; only the
    Kronecker product is data-relevant, and the rescaled pair is the
    truth).  Raises :class:`InfeasibleDesign` when no shift can satisfy
    the corridor, or when the trace normalization pushes eigenvalues back
    out of it.
    """
    if p < 1 or q < 1:
        raise InfeasibleDesign("p and q must be >= 1")
    if not 0.0 < tau1 < 1.0:
        raise InfeasibleDesign("tau1 must lie in (0, 1)")

    omega_raw = _raw_precision(p, design, derive_seed(seed, 1), side=1)
    gamma_raw = _raw_precision(q, design, derive_seed(seed, 2), side=2)
    omega = _shift_into_corridor(omega_raw, tau1)
    gamma = _shift_into_corridor(gamma_raw, tau1)

    sigma = np.linalg.inv(omega)
    sigma = 0.5 * (sigma + sigma.T)
    psi_unscaled = np.linalg.inv(gamma)
    psi_unscaled = 0.5 * (psi_unscaled + psi_unscaled.T)
    scale = q / float(np.trace(psi_unscaled))
    psi = scale * psi_unscaled
    gamma = gamma / scale

    lo, hi = tau1, 1.0 / tau1
    for name, mat in (("sigma0", sigma), ("psi0", psi)):
        eigenvalues = np.linalg.eigvalsh(mat)
        if eigenvalues[0] <= lo or eigenvalues[-1] >= hi:
            raise InfeasibleDesign(
                f"trace normalization leaves {name} eigenvalues "
                f"[{eigenvalues[0]:.6g}, {eigenvalues[-1]:.6g}] outside "
                f"({lo:.6g}, {hi:.6g}); use a milder design or smaller tau1"
            )

    support1 = _off_diagonal_support(omega)
    support2 = _off_diagonal_support(gamma)
    return TrueModel(
        p=p,
        q=q,
        sigma0=SpdMatrix(sigma),
        psi0=SpdMatrix(psi),
        omega0=SpdMatrix(omega),
        gamma0=SpdMatrix(gamma),
        s1=len(support1),
        s2=len(support2),
        support1=support1,
        support2=support2,
        tau1=tau1,
    )


def sample_matrix_normal(model: TrueModel, n: int, seed: int) -> Dataset:
    """Draw ``n`` i.i.d. matrix-normal observations from ``model``.

    Each ``Y_i = L_sigma Z_i L_psi^T`` with ``Z_i`` standard normal,
    so ``cov(vec(Y_i)) = psi0 (x) sigma0``.  Deterministic given
    ``(model, n, seed)``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    p, q = model.p, model.q
    stream: NormalStream = standard_normal_stream(seed)
    z = stream.draw(n * p * q).reshape(n, p, q)
    y = np.matmul(np.matmul(model.sigma0.chol, z), model.psi0.chol.T)
    return Dataset(n=n, p=p, q=q, samples=y, seed=int(seed), model_id=model.digest())


def write_dataset(dataset: Dataset, path) -> None:
    """Write a dataset in the documented plain-text format."""
    lines = [f"matnorm-dataset,{DATASET_FORMAT_VERSION}"]
    lines.append("n,p,q,seed,model_id")
    model_id = dataset.model_id or ""
    lines.append(f"{dataset.n},{dataset.p},{dataset.q},{dataset.seed},{model_id}")
    for i in range(dataset.n):
        for r in range(dataset.p):
            lines.append(",".join(f"{v:.17g}" for v in dataset.samples[i, r]))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")


def read_dataset(path) -> Dataset:
    """Read a dataset written by :func:`write_dataset`.

    Raises :class:`ConfigError` on malformed content or on a newer major
    format version.
    """
    try:
        with open(path, "r", encoding="ascii") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read dataset file {path}: {exc}") from None
    if not lines or not lines[0].startswith("matnorm-dataset,"):
        raise ConfigError(f"{path}: missing 'matnorm-dataset' header")
    try:
        version = int(lines[0].split(",", 1)[1])
    except ValueError:
        raise ConfigError(f"{path}: unparseable format version") from None
    if version > DATASET_FORMAT_VERSION:
        raise ConfigError(
            f"{path}: format version {version} is newer than supported "
            f"({DATASET_FORMAT_VERSION})"
        )
    if len(lines) < 3 or lines[1] != "n,p,q,seed,model_id":
        raise ConfigError(f"{path}: malformed header")
    fields = lines[2].split(",")
    if len(fields) != 5:
        raise ConfigError(f"{path}: header row has {len(fields)} fields, expected 5")
    try:
        n, p, q, seed = (int(v) for v in fields[:4])
    except ValueError:
        raise ConfigError(f"{path}: non-integer shape/seed fields") from None
    model_id = fields[4] or None
    expected = 3 + n * p
    if len(lines) != expected:
        raise ConfigError(
            f"{path}: expected {expected} lines for n={n}, p={p}, got {len(lines)}"
        )
    samples = np.empty((n, p, q), dtype=float)
    row = 3
    for i in range(n):
        for r in range(p):
            parts = lines[row].split(",")
            if len(parts) != q:
                raise ConfigError(
                    f"{path}: line {row + 1} has {len(parts)} values, expected {q}"
                )
            try:
                samples[i, r] = [float(v) for v in parts]
            except ValueError:
                raise ConfigError(f"{path}: unparseable value on line {row + 1}") from None
            row += 1
    return Dataset(n=n, p=p, q=q, samples=samples, seed=seed, model_id=model_id)
