import numpy as np
import pytest

from matnorm.errors import ConfigError, InfeasibleDesign, ShapeMismatch
from matnorm.linalg import SpdMatrix, kron, sym_eigen
from matnorm.sampling import (
    Banded,
    Dataset,
    RandomSupport,
    TrueModel,
    make_true_model,
    read_dataset,
    sample_matrix_normal,
    write_dataset,
)


def model_from_covariances(sigma0, psi0, tau1):
    """Assemble a TrueModel directly from covariance matrices (tests only)."""
    sigma0 = np.asarray(sigma0, float)
    psi0 = np.asarray(psi0, float)
    omega0 = np.linalg.inv(sigma0)
    gamma0 = np.linalg.inv(psi0)
    omega0 = 0.5 * (omega0 + omega0.T)
    gamma0 = 0.5 * (gamma0 + gamma0.T)
    sup1 = frozenset(
        (i, j) for i in range(sigma0.shape[0]) for j in range(sigma0.shape[0])
        if i != j and omega0[i, j] != 0.0
    )
    sup2 = frozenset(
        (i, j) for i in range(psi0.shape[0]) for j in range(psi0.shape[0])
        if i != j and gamma0[i, j] != 0.0
    )
    return TrueModel(
        p=sigma0.shape[0], q=psi0.shape[0],
        sigma0=SpdMatrix(sigma0), psi0=SpdMatrix(psi0),
        omega0=SpdMatrix(omega0), gamma0=SpdMatrix(gamma0),
        s1=len(sup1), s2=len(sup2), support1=sup1, support2=sup2, tau1=tau1,
    )


class TestMakeTrueModel:
    def test_zero_bandwidth_gives_identity(self):
        model = make_true_model(3, 3, Banded(0, 0.5), tau1=0.3, seed=1)
        assert np.allclose(model.sigma0.values, np.eye(3))
        assert np.allclose(model.psi0.values, np.eye(3))
        assert model.s1 == 0 and model.s2 == 0

    def test_banded_counts_and_offdiagonals(self):
        model = make_true_model(4, 4, Banded(1, 0.45), tau1=0.2, seed=0)
        assert model.s1 == 6  # 2 (p - 1) ordered off-diagonal nonzeros
        omega = model.omega0.values
        # the corridor shift touches only the diagonal
        for i in range(3):
            assert omega[i, i + 1] == pytest.approx(-0.45)
        assert omega[0, 2] == 0.0

    def test_random_support_invariants(self):
        model = make_true_model(5, 4, RandomSupport(4, 2, 0.3), tau1=0.25, seed=7)
        assert model.s1 == 4 and model.s2 == 2
        assert all((j, i) in model.support1 for (i, j) in model.support1)
        for mat in (model.sigma0, model.psi0):
            eigenvalues, _ = sym_eigen(mat)
            assert eigenvalues[0] > model.tau1
            assert eigenvalues[-1] < 1.0 / model.tau1

    def test_trace_normalization(self):
        model = make_true_model(6, 5, Banded(2, 0.2), tau1=0.2, seed=3)
        assert np.trace(model.psi0.values) == pytest.approx(5.0, rel=1e-10)

    def test_same_seed_reproduces_model(self):
        a = make_true_model(5, 4, RandomSupport(6, 4, 0.25), tau1=0.25, seed=9)
        b = make_true_model(5, 4, RandomSupport(6, 4, 0.25), tau1=0.25, seed=9)
        assert np.array_equal(a.omega0.values, b.omega0.values)
        assert a.support1 == b.support1

    def test_infeasible_design(self):
        # spread of a strongly banded precision exceeds a narrow corridor
        with pytest.raises(InfeasibleDesign):
            make_true_model(8, 8, Banded(1, 3.0), tau1=0.8, seed=0)
        with pytest.raises(InfeasibleDesign):
            make_true_model(4, 4, RandomSupport(3, 0, 0.3), tau1=0.3, seed=0)
        with pytest.raises(InfeasibleDesign):
            make_true_model(3, 3, Banded(3, 0.1), tau1=0.3, seed=0)


class TestSampler:
    def test_same_seed_bit_identical(self):
        model = make_true_model(3, 2, Banded(1, 0.3), tau1=0.3, seed=4)
        first = sample_matrix_normal(model, 10, 77)
        second = sample_matrix_normal(model, 10, 77)
        assert np.array_equal(first.samples, second.samples)
        assert first.model_id == second.model_id == model.digest()

    def test_moments_identity_model(self):
        model = make_true_model(2, 2, Banded(0, 0.0), tau1=0.3, seed=0)
        data = sample_matrix_normal(model, 50_000, 1)
        bound = 4.0 / np.sqrt(50_000)
        assert np.max(np.abs(data.samples.mean(axis=0))) < bound
        variances = data.samples.var(axis=0)
        assert np.max(np.abs(variances - 1.0)) < 0.05

    def test_column_covariance_matches_sigma0(self):
        sigma0 = np.array([[1.0, 0.5], [0.5, 1.0]])
        model = model_from_covariances(sigma0, np.eye(2), tau1=0.4)
        data = sample_matrix_normal(model, 100_000, 12)
        columns = np.concatenate([data.samples[:, :, 0], data.samples[:, :, 1]])
        emp = columns.T @ columns / columns.shape[0]
        count = columns.shape[0]
        for i in range(2):
            for j in range(2):
                mc_se = np.sqrt((sigma0[i, i] * sigma0[j, j] + sigma0[i, j] ** 2) / count)
                assert abs(emp[i, j] - sigma0[i, j]) < 3.0 * mc_se

    @pytest.mark.parametrize("p,q,seed", [(2, 3, 21), (3, 2, 22), (3, 3, 23)])
    def test_vec_covariance_is_kronecker(self, p, q, seed):
        model = make_true_model(p, q, RandomSupport(2, 2, 0.25), tau1=0.2, seed=seed)
        n = 100_000
        data = sample_matrix_normal(model, n, seed + 1)
        # column-stacking vec of each sample
        vecs = data.samples.transpose(0, 2, 1).reshape(n, p * q)
        emp = vecs.T @ vecs / n
        target = kron(model.psi0.values, model.sigma0.values)
        mc_se = np.sqrt(
            (np.outer(np.diag(target), np.diag(target)) + target ** 2) / n
        )
        assert np.all(np.abs(emp - target) < 4.0 * mc_se)


class TestDataset:
    def test_validation(self):
        with pytest.raises(ShapeMismatch):
            Dataset(n=2, p=2, q=2, samples=np.zeros((2, 2, 3)), seed=0)
        with pytest.raises(ValueError):
            Dataset(n=0, p=1, q=1, samples=np.zeros((0, 1, 1)), seed=0)
        with pytest.raises(ValueError):
            Dataset(n=1, p=1, q=1, samples=np.full((1, 1, 1), np.inf), seed=0)

    def test_samples_read_only(self):
        data = Dataset(n=1, p=2, q=2, samples=np.zeros((1, 2, 2)), seed=0)
        with pytest.raises(ValueError):
            data.samples[0, 0, 0] = 1.0


class TestSerialization:
    def test_round_trip_exact(self, tmp_path):
        model = make_true_model(3, 4, Banded(1, 0.35), tau1=0.25, seed=2)
        data = sample_matrix_normal(model, 5, 31)
        path = tmp_path / "data.csv"
        write_dataset(data, path)
        loaded = read_dataset(path)
        assert loaded.n == data.n and loaded.p == data.p and loaded.q == data.q
        assert loaded.seed == data.seed
        assert loaded.model_id == data.model_id
        assert np.array_equal(loaded.samples, data.samples)

    def test_rewrite_is_byte_identical(self, tmp_path):
        model = make_true_model(2, 2, Banded(1, 0.3), tau1=0.3, seed=2)
        data = sample_matrix_normal(model, 3, 5)
        first = tmp_path / "a.csv"
        second = tmp_path / "b.csv"
        write_dataset(data, first)
        write_dataset(data, second)
        assert first.read_bytes() == second.read_bytes()

    @pytest.mark.parametrize("mutation", [
        lambda lines: ["bogus-header,1"] + lines[1:],
        lambda lines: [lines[0].replace(",1", ",2")] + lines[1:],
        lambda lines: lines[:-1],
        lambda lines: lines[:3] + ["1.0,not_a_number"] + lines[4:],
        lambda lines: lines[:2] + ["3,2,x,5,"] + lines[3:],
    ])
    def test_malformed_files_raise_config_error(self, tmp_path, mutation):
        model = make_true_model(2, 2, Banded(0, 0.0), tau1=0.3, seed=2)
        data = sample_matrix_normal(model, 3, 5)
        path = tmp_path / "data.csv"
        write_dataset(data, path)
        lines = path.read_text().splitlines()
        path.write_text("\n".join(mutation(lines)) + "\n")
        with pytest.raises(ConfigError):
            read_dataset(path)
