"""Explicit-coordinate reference computations.

For kernels with a finite feature map (linear, logarithmic, small
polynomial) the optimal operator can be assembled directly in feature
coordinates. These routines are deliberately independent of the Gram-only
pipeline in :mod:`okdmd.core` and serve as its test oracle.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import eigenfunctions, coefficient_vector, predict
from .exceptions import CapacityError
from .kernels import Linear, Logarithmic

MAX_ORACLE_DIM = 10**4

__all__ = ["optimal_operator", "unconstrained_operator", "OracleReport", "compare"]


def _pinv(M, rank_tol):
    # Gram eigenvalues are thresholded at rank_tol, i.e. singular values at sqrt(rank_tol)
    return np.linalg.pinv(M, rcond=np.sqrt(rank_tol))


def unconstrained_operator(FX, FY, rank_tol=1e-10):
    return FY @ _pinv(FX, rank_tol)


def optimal_operator(FX, FY, k, rank_tol=1e-10):
    """``P P* FY FX^+`` with ``P`` the k leading left singular vectors of ``FY FX^+ FX``."""
    FXp = _pinv(FX, rank_tol)
    Z = FY @ (FXp @ FX)
    U, s, _ = np.linalg.svd(Z, full_matrices=False)
    r = int(np.count_nonzero(s > np.sqrt(rank_tol) * s[0])) if s[0] > 0 else 0
    Uk = U[:, : min(k, r)]
    return Uk @ (Uk.T @ (FY @ FXp))


def features(kernel, A):
    kernel = kernels.parse_kernel(kernel)
    dim = kernel.feature_dim(A.shape[0])
    if dim > MAX_ORACLE_DIM:
        raise CapacityError(f"explicit feature dimension {dim} exceeds oracle cap {MAX_ORACLE_DIM}")
    return kernels.feature_map(kernel, A)


@dataclass
class OracleReport:
    kernel: str
    k: int
    k_eff: int
    left_identity: float
    right_identity: float
    normalization: float
    feature_prediction: float
    state_prediction: float = float("nan")
    unconstrained: float = float("nan")

    def residuals(self):
        out = {
            "left_identity": self.left_identity,
            "right_identity": self.right_identity,
            "normalization": self.normalization,
            "feature_prediction": self.feature_prediction,
            "state_prediction": self.state_prediction,
            "unconstrained": self.unconstrained,
        }
        return {k: v for k, v in out.items() if np.isfinite(v)}

    def max_residual(self):
        return max(self.residuals().values())


def _rel(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), np.finfo(float).tiny))


def compare(model, snapshots, thetas, times=(2, 3)):
    """Check a fitted :class:`~okdmd.core.ReducedModel` against explicit coordinates.

    Args:
        thetas: ``p x n`` matrix of evaluation points.

    Returns:
        OracleReport with relative residuals of the eigen-identities, the
        biorthonormality of the eigenvectors, and predictions (feature space
        and, for exactly invertible kernels, state space).
    """
    kern = model.kernel
    FX = features(kern, snapshots.X)
    FY = features(kern, snapshots.Y)
    FT = features(kern, thetas)
    A = optimal_operator(FX, FY, model.k, model.rank_tol)
    normA = np.linalg.norm(A, 2)

    xi = FX @ (model.R.T @ model.Xi)
    zeta = FY @ (model.C.T @ model.Zeta)
    lam = model.lambda_
    left = max(
        np.linalg.norm(A.T @ xi[:, i] - np.conj(lam[i]) * xi[:, i]) / (normA * np.linalg.norm(xi[:, i]))
        for i in range(model.k_eff)
    )
    right = max(
        np.linalg.norm(A @ zeta[:, i] - lam[i] * zeta[:, i]) / (normA * np.linalg.norm(zeta[:, i]))
        for i in range(model.k_eff)
    )
    norm_err = float(np.abs(xi.conj().T @ zeta - np.eye(model.k_eff)).max())

    phi = eigenfunctions(model, thetas)
    feat, state = 0.0, 0.0
    exact_inverse = isinstance(kern, (Linear, Logarithmic))
    for t in times:
        eta = np.linalg.matrix_power(A, t - 1) @ FT
        G = coefficient_vector(model, thetas, t, phi=phi)
        feat = max(feat, _rel(FY @ G, eta))
        if exact_inverse:
            truth = eta if isinstance(kern, Linear) else np.expm1(eta)
            state = max(state, _rel(predict(model, thetas, t), truth))

    report = OracleReport(
        kernel=kern.designation,
        k=model.k,
        k_eff=model.k_eff,
        left_identity=float(left),
        right_identity=float(right),
        normalization=norm_err,
        feature_prediction=feat,
        state_prediction=state if exact_inverse else float("nan"),
    )
    full_rank = np.linalg.matrix_rank(FX, tol=np.sqrt(model.rank_tol) * np.linalg.norm(FX, 2)) == FX.shape[1]
    if model.k >= snapshots.m and full_rank:
        A_ls = unconstrained_operator(FX, FY, model.rank_tol)
        report.unconstrained = max(
            _rel(A, A_ls), _rel(FY @ coefficient_vector(model, thetas, 2, phi=phi), A_ls @ FT)
        )
    return report
