import numpy as np
import pytest

from okdmd import baselines, core
from okdmd.baselines import kdmd_eigenfunctions, kdmd_fit, kdmd_predict, load_kdmd, lowrank_dmd_fit, save_kdmd
from okdmd.core import SnapshotSet
from okdmd.exceptions import InvalidInputError, RankDeficiencyWarning
from okdmd.harness import epsilon
from okdmd.synthgen import desk_config, generate_dataset

from conftest import linear_snapshots


class TestKdmdFit:
    def test_fixed_point(self, rng):
        X = rng.standard_normal((6, 4))
        model = kdmd_fit(SnapshotSet(X, X), "linear")
        np.testing.assert_allclose(model.lambda_, 1.0, atol=1e-10)
        np.testing.assert_allclose(kdmd_predict(model, X, 2), X, atol=1e-10)

    def test_hand_instance(self):
        # p = m = 2, linear kernel: K-DMD is the eigen-expansion of A = Y X^-1
        X = np.array([[1.0, 0.5], [0.2, 1.0]])
        A = np.array([[0.9, 0.3], [-0.2, 0.6]])
        model = kdmd_fit(SnapshotSet(X, A @ X), "linear")
        np.testing.assert_allclose(np.sort_complex(model.lambda_), np.sort_complex(np.linalg.eigvals(A)), atol=1e-12)
        for lam, mu in zip(model.lambda_, model.modes.T):
            np.testing.assert_allclose(A @ mu, lam * mu, atol=1e-12)
        theta = np.array([0.3, -0.7])
        for t in (1, 2, 3):
            np.testing.assert_allclose(kdmd_predict(model, theta, t), np.linalg.matrix_power(A, t - 1) @ theta, atol=1e-12)

    def test_eq_modes_formula(self, rng):
        s = SnapshotSet(rng.uniform(-0.5, 0.5, (5, 3)), rng.uniform(-0.5, 0.5, (5, 3)))
        model = kdmd_fit(s, "log")
        expected = s.Y @ model.R.T @ np.linalg.pinv(model.Xi.conj().T) @ np.diag(1 / model.lambda_)
        np.testing.assert_allclose(model.modes, expected, atol=1e-10)

    def test_rank_deficiency_warning(self, rng):
        X = rng.standard_normal((3, 5))
        with pytest.warns(RankDeficiencyWarning):
            model = kdmd_fit(SnapshotSet(X, 0.5 * X), "linear")
        assert model.info["rank_gxx"] == 3

    def test_zero_eigenvalue_zero_mode(self):
        X = np.eye(2)
        Y = np.array([[1.0, 0.0], [0.0, 0.0]])
        model = kdmd_fit(SnapshotSet(X, Y), "linear")
        zero = np.flatnonzero(np.abs(model.lambda_) < 1e-12)
        assert zero.size == 1
        assert np.all(model.modes[:, zero] == 0)

    def test_sorted(self, desk_data):
        model = kdmd_fit(desk_data[0], "log")
        assert np.all(np.diff(np.abs(model.lambda_)) <= 1e-12)


class TestKdmdPredict:
    def test_single_term(self, desk_data):
        train, test = desk_data
        model = kdmd_fit(train, "log")
        theta = test.X[:, 0]
        phi = kdmd_eigenfunctions(model, theta)
        for t in (1, 3):
            expected = (model.lambda_[0] ** (t - 1) * phi[0] * model.modes[:, 0]).real
            np.testing.assert_allclose(kdmd_predict(model, theta, t, k=1), expected, rtol=1e-12)

    def test_t1(self, desk_data):
        train, test = desk_data
        model = kdmd_fit(train, "log")
        phi = kdmd_eigenfunctions(model, test.X)
        np.testing.assert_allclose(kdmd_predict(model, test.X, 1), (model.modes @ phi).real, rtol=1e-12, atol=1e-18)

    def test_recompute_from_serialized(self, desk_data, tmp_path):
        train, test = desk_data
        save_kdmd(kdmd_fit(train, "log"), tmp_path, k=7)
        meta = core.read_manifest(tmp_path / "model.meta")
        assert meta["method"] == "kdmd" and meta["k"] == "7"
        model = load_kdmd(tmp_path)
        from okdmd.linalg import read_matrix

        lam = read_matrix(tmp_path / "lambda.mat")[0]
        Xi, R, modes = (read_matrix(tmp_path / f"{n}.mat") for n in ("Xi", "R", "modes"))
        theta = test.X[:, 3]
        kx = np.log1p(train.X).T @ np.log1p(theta)
        phi = Xi.conj().T @ (R @ kx)
        expected = sum(lam[i] ** 2 * phi[i] * modes[:, i] for i in range(7)).real
        got = kdmd_predict(model, theta, 3, k=7)
        assert np.linalg.norm(got - expected) <= 1e-12 * np.linalg.norm(expected)

    @pytest.mark.parametrize("k", [0, 21, 2.5])
    def test_invalid_k(self, desk_data, k):
        model = kdmd_fit(desk_data[0], "log")
        with pytest.raises(InvalidInputError):
            kdmd_predict(model, desk_data[0].X[:, 0], 2, k)

    def test_least_squares_consistency(self, rng):
        X = rng.standard_normal((3, 6))
        Y = np.tanh(X) + 0.1 * rng.standard_normal((3, 6))
        with pytest.warns(RankDeficiencyWarning):
            model = kdmd_fit(SnapshotSet(X, Y), "linear")
        nz = int(np.count_nonzero(np.abs(model.lambda_) > 1e-10 * abs(model.lambda_[0])))
        pred = kdmd_predict(model, X, 2, nz)
        ls = Y @ np.linalg.pinv(X) @ X
        assert abs(np.linalg.norm(Y - pred) - np.linalg.norm(Y - ls)) <= 1e-10


class TestCoincidence:
    @pytest.mark.parametrize("kernel", ["log", "linear"])
    def test_matches_okdmd_at_full_rank(self, desk_data, kernel):
        train, _ = desk_data
        ok = core.predict(core.fit(train, kernel, train.m), train.X)
        kd = kdmd_predict(kdmd_fit(train, kernel), train.X, 2)
        assert np.linalg.norm(ok - kd) <= 1e-6 * np.linalg.norm(kd)
        assert abs(epsilon(ok, train.Y) - epsilon(kd, train.Y)) <= 1e-6


class TestLowRank:
    def test_linear_dynamics_recovery(self, rng):
        p = 5
        V = rng.standard_normal((p, p))
        A = V @ np.diag([0.95, 0.8, -0.6, 0.4, 0.2]) @ np.linalg.inv(V)
        traj = [rng.standard_normal((p,)) for _ in range(3)]
        traj = np.array([[np.linalg.matrix_power(A, j) @ x for j in range(4)] for x in traj])
        s = SnapshotSet.from_trajectories(traj)
        model = lowrank_dmd_fit(s, 5)
        for i in range(3):
            for t in (2, 3, 4):
                np.testing.assert_allclose(core.predict(model, traj[i, 0], t), traj[i, t - 1], atol=1e-8)

    def test_fixed_point(self, rng):
        X = rng.standard_normal((6, 4))
        model = lowrank_dmd_fit(SnapshotSet(X, X), 3)
        theta = rng.standard_normal(6)
        np.testing.assert_allclose(core.predict(model, theta, 2), core.predict(model, theta, 9), atol=1e-10)

    def test_linear_kernel_path(self, desk_data):
        model = lowrank_dmd_fit(desk_data[0], 4)
        assert model.kernel.designation == "linear"
        assert baselines.__all__.count("lowrank_dmd_fit") == 1

    def test_error_decreases_with_rank(self):
        grid, cfg = desk_config(modes=18)
        train, _ = generate_dataset(grid, cfg)
        errs = [epsilon(core.predict(lowrank_dmd_fit(train, k), train.X), train.Y) for k in range(1, 21)]
        for a, b in zip(errs, errs[1:]):
            assert b <= 1.05 * a
        assert errs[-1] < 1e-6 < errs[16]
