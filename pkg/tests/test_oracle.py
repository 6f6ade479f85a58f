import numpy as np
import pytest
from scipy.optimize import minimize

from okdmd import oracle
from okdmd.core import SnapshotSet, fit
from okdmd.exceptions import CapacityError
from okdmd.kernels import feature_map, parse_kernel

from conftest import linear_snapshots


def micro_instance(kernel, seed):
    r = np.random.default_rng(seed)
    p = {"linear": 6, "poly:2": 2, "log": 6}[kernel]
    m = 4
    X = 0.5 * r.standard_normal((p, m))
    Y = np.tanh(X) + 0.3 * np.roll(X, 1, axis=0) + 0.1 * r.standard_normal((p, m))
    if kernel == "log":
        X, Y = np.clip(X, -0.8, None), np.clip(Y, -0.8, None)
    return SnapshotSet(X, Y)


def operator_from_model(model, FX, FY):
    xi = FX @ (model.R.T @ model.Xi)
    zeta = FY @ (model.C.T @ model.Zeta)
    return ((zeta * model.lambda_) @ xi.conj().T).real


def objective(A, FX, FY):
    return float(np.linalg.norm(FY - A @ FX) ** 2)


def direct_minimum(FX, FY, k, starts=20, seed=0):
    d = FX.shape[0]
    r = np.random.default_rng(seed)

    def fun(v):
        U, W = v[: d * k].reshape(d, k), v[d * k :].reshape(k, d)
        res = U @ (W @ FX) - FY
        gU = 2 * res @ (W @ FX).T
        gW = 2 * U.T @ res @ FX.T
        return float(np.sum(res**2)), np.concatenate([gU.ravel(), gW.ravel()])

    best = np.inf
    for _ in range(starts):
        sol = minimize(fun, r.standard_normal(2 * d * k), jac=True, method="L-BFGS-B", options={"gtol": 1e-12, "ftol": 1e-15, "maxiter": 5000})
        best = min(best, sol.fun)
    return best


@pytest.mark.parametrize("kernel", ["linear", "poly:2", "log"])
@pytest.mark.parametrize("k", [1, 2])
class TestOptimality:
    def test_against_baselines_and_direct_search(self, kernel, k):
        s = micro_instance(kernel, seed=k)
        kern = parse_kernel(kernel)
        FX, FY = feature_map(kern, s.X), feature_map(kern, s.Y)
        assert FX.shape[0] <= 6 and s.m <= 4
        model = fit(s, kern, k)
        A = operator_from_model(model, FX, FY)
        assert np.linalg.matrix_rank(A, tol=1e-10) <= k
        f_star = objective(A, FX, FY)

        # truncated SVD of the unconstrained solution
        U, sv, Vt = np.linalg.svd(FY @ np.linalg.pinv(FX))
        A_tsvd = (U[:, :k] * sv[:k]) @ Vt[:k]
        assert f_star <= objective(A_tsvd, FX, FY) + 1e-12

        # random rank-k perturbations of the optimum
        r = np.random.default_rng(99)
        Ua, sa, Vat = np.linalg.svd(A)
        L, Rt = Ua[:, :k] * sa[:k], Vat[:k]
        dL = 1e-3 * r.standard_normal((10**4, *L.shape))
        dR = 1e-3 * r.standard_normal((10**4, *Rt.shape))
        pert = np.einsum("nik,nkj->nij", L + dL, Rt + dR)
        vals = np.sum((FY[None] - pert @ FX) ** 2, axis=(1, 2))
        assert vals.min() >= f_star - 1e-12

        # direct numerical minimization over rank-k factorizations
        assert abs(direct_minimum(FX, FY, k) - f_star) <= 1e-6


class TestCompare:
    def test_linear_dynamics(self, rng):
        _, s = linear_snapshots(rng, p=6, m=5)
        for k in (1, 3, 5):
            report = oracle.compare(fit(s, "linear", k), s, rng.standard_normal((6, 4)))
            assert report.max_residual() <= 1e-10, report.residuals()

    @pytest.mark.parametrize("k", [2, 10, 20])
    def test_log_desk(self, desk_data, k):
        train, test = desk_data
        report = oracle.compare(fit(train, "log", k), train, test.X)
        assert report.max_residual() <= 1e-8, report.residuals()
        assert np.isfinite(report.state_prediction)

    def test_unconstrained_reduction(self, desk_data):
        train, test = desk_data
        report = oracle.compare(fit(train, "log", train.m), train, test.X)
        assert np.isfinite(report.unconstrained) and report.unconstrained <= 1e-8

    def test_polynomial_small(self, rng):
        X = 0.3 * rng.standard_normal((3, 6))
        s = SnapshotSet(X, np.sin(X) + 0.1 * X**2)
        report = oracle.compare(fit(s, "poly:2", 4), s, 0.3 * rng.standard_normal((3, 2)))
        assert report.max_residual() <= 1e-8
        assert "state_prediction" not in report.residuals()

    def test_capacity(self, rng):
        X = rng.standard_normal((200, 3))
        s = SnapshotSet(X, X)
        with pytest.raises(CapacityError):
            oracle.compare(fit(s, "poly:3", 2), s, X)

    def test_optimal_operator_rank(self, rng):
        FX, FY = rng.standard_normal((5, 4)), rng.standard_normal((5, 4))
        assert np.linalg.matrix_rank(oracle.optimal_operator(FX, FY, 2)) == 2
        np.testing.assert_allclose(oracle.optimal_operator(FX, FY, 4), oracle.unconstrained_operator(FX, FY), atol=1e-10)
