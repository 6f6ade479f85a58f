"""scikit-learn style wrappers.

Estimators take samples as rows: ``fit(X, y)`` receives the ``(m, p)``
predecessor states ``X`` and their successors ``y``. ``predict(X, t)``
advances each row ``t - 1`` steps and ``transform`` returns eigenfunction
values.
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import baselines, core
from .preimage import SolverOptions

__all__ = ["OKDMD", "KDMD", "LowRankDMD"]


def _check_pair(X, y):
    X = check_array(X, dtype=np.float64)
    y = check_array(y, dtype=np.float64)
    if X.shape != y.shape:
        raise ValueError(f"X and y must have the same shape, got {X.shape} and {y.shape}")
    return core.SnapshotSet(X.T, y.T)


class _DMDBase(RegressorMixin, BaseEstimator):
    def _check_input(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X

    @property
    def eigenvalues_(self):
        check_is_fitted(self, "model_")
        return self.model_.lambda_


class OKDMD(_DMDBase):
    """Optimal rank-constrained kernel DMD.

    Args:
        kernel: kernel designation (``"log"``, ``"linear"``, ``"poly:2"``,
            ``"gauss:SIGMA"``) or a :class:`~okdmd.kernels.KernelSpec`.
        n_components: rank k of the reduced model.
        rank_tol: relative threshold on Gram eigenvalues.
        inverse: ``"closed_form"`` or ``"variational"`` pre-image.
        max_iter: iteration cap of the variational pre-image solver.
        gradient_tol: stationarity tolerance of the variational solver.
    """

    def __init__(
        self,
        kernel="log",
        n_components=2,
        rank_tol=core.DEFAULT_RANK_TOL,
        inverse="closed_form",
        max_iter=500,
        gradient_tol=1e-9,
    ):
        self.kernel = kernel
        self.n_components = n_components
        self.rank_tol = rank_tol
        self.inverse = inverse
        self.max_iter = max_iter
        self.gradient_tol = gradient_tol

    def _fit_model(self, snapshots):
        return core.fit(snapshots, self.kernel, self.n_components, self.rank_tol)

    def fit(self, X, y):
        snapshots = _check_pair(X, y)
        self.model_ = self._fit_model(snapshots)
        self.n_features_in_ = snapshots.p
        return self

    def transform(self, X):
        """Eigenfunction values, shape ``(n_samples, k_eff)`` (complex)."""
        X = self._check_input(X)
        return core.eigenfunctions(self.model_, X.T).T

    def predict(self, X, t=2):
        X = self._check_input(X)
        opts = SolverOptions(max_iters=self.max_iter, gradient_tolerance=self.gradient_tol)
        return core.predict(self.model_, X.T, t, self.inverse, solver_options=opts).T


class LowRankDMD(OKDMD):
    """Optimal rank-k linear DMD (the identity feature map)."""

    def __init__(self, n_components=2, rank_tol=core.DEFAULT_RANK_TOL):
        self.n_components = n_components
        self.rank_tol = rank_tol

    kernel = "linear"
    inverse = "closed_form"
    max_iter = 500
    gradient_tol = 1e-9

    def _fit_model(self, snapshots):
        return baselines.lowrank_dmd_fit(snapshots, self.n_components, self.rank_tol)


class KDMD(_DMDBase):
    """Kernel DMD with the modal expansion truncated to ``n_components`` terms.

    Args:
        kernel: kernel designation or :class:`~okdmd.kernels.KernelSpec`.
        n_components: number of modes used by ``predict``; ``None`` keeps
            all of them.
        rank_tol: relative threshold on Gram eigenvalues.
    """

    def __init__(self, kernel="log", n_components=None, rank_tol=core.DEFAULT_RANK_TOL):
        self.kernel = kernel
        self.n_components = n_components
        self.rank_tol = rank_tol

    def fit(self, X, y):
        snapshots = _check_pair(X, y)
        self.model_ = baselines.kdmd_fit(snapshots, self.kernel, self.rank_tol)
        self.n_features_in_ = snapshots.p
        return self

    def transform(self, X):
        X = self._check_input(X)
        return baselines.kdmd_eigenfunctions(self.model_, X.T).T

    def predict(self, X, t=2):
        X = self._check_input(X)
        k = self.n_components
        if k is not None:
            k = min(k, self.model_.m)
        return baselines.kdmd_predict(self.model_, X.T, t, k).T
