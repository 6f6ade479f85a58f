"""Reference methods for comparison: kernel DMD (K-DMD) and low-rank DMD.

K-DMD diagonalizes the compressed unconstrained operator ``Y X^+`` once and
truncates the modal expansion at prediction time. Low-rank DMD is the
optimal reduced model with the identity feature map, so it reuses
:func:`okdmd.core.fit` with the linear kernel.
"""

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import core, kernels
from .core import DEFAULT_RANK_TOL, GramCache, build_gram, read_manifest, write_manifest
from .exceptions import InvalidInputError, RankDeficiencyWarning
from .linalg import eig, gram_factor, pseudo_inverse, read_matrix, write_matrix

__all__ = [
    "KdmdModel",
    "kdmd_fit",
    "kdmd_eigenfunctions",
    "kdmd_predict",
    "lowrank_dmd_fit",
    "save_kdmd",
    "load_kdmd",
]


@dataclass(frozen=True)
class KdmdModel:
    """Full K-DMD expansion; all m eigen-triples are kept."""

    lambda_: np.ndarray
    Xi: np.ndarray
    R: np.ndarray
    modes: np.ndarray
    gram: GramCache
    X_train: np.ndarray
    kernel: kernels.KernelSpec
    rank_tol: float = DEFAULT_RANK_TOL
    info: dict = field(default_factory=dict, compare=False)

    @property
    def p(self):
        return self.X_train.shape[0]

    @property
    def m(self):
        return self.X_train.shape[1]


def kdmd_fit(snapshots, kernel, rank_tol=DEFAULT_RANK_TOL):
    """Fit K-DMD from Gram data.

    The eigenvectors ``Xi`` of ``R (Y*X) R^T`` give the eigenfunctions
    ``phi_i(theta) = Xi_i^* R X*Psi(theta)``; the modes are the
    least-squares fit ``Y R^T (Xi^*)^+ diag(1 / lambda)`` with zero modes
    for vanishing eigenvalues.

    Warns:
        RankDeficiencyWarning: when ``X*X`` is numerically rank deficient.
    """
    kernel = kernels.parse_kernel(kernel)
    g = build_gram(snapshots, kernel)
    sx, Vx = gram_factor(g.Gxx, rank_tol)
    rank = int(np.count_nonzero(sx > 0))
    if rank < snapshots.m:
        warnings.warn(
            f"X*X has numerical rank {rank} < m = {snapshots.m}; using pseudo-inverses",
            RankDeficiencyWarning,
            stacklevel=2,
        )
    sx_inv = np.divide(1.0, sx, out=np.zeros_like(sx), where=sx > 0)
    R = sx_inv[:, None] * Vx.T

    res = eig(R @ g.Gyx @ R.T)
    # eigenvectors of this matrix are left eigenvectors of the compressed
    # operator for the conjugate eigenvalue
    lam = np.conj(res.values)
    Xi = res.vectors
    top = abs(lam[0])
    inv_lam = np.zeros_like(lam)
    nz = np.abs(lam) > rank_tol * top if top > 0 else np.zeros(lam.shape, dtype=bool)
    inv_lam[nz] = 1.0 / lam[nz]
    modes = (snapshots.Y @ R.T) @ pseudo_inverse(Xi.conj().T, rank_tol) * inv_lam
    return KdmdModel(
        lambda_=lam,
        Xi=Xi,
        R=R,
        modes=modes,
        gram=g,
        X_train=snapshots.X,
        kernel=kernel,
        rank_tol=rank_tol,
        info={"rank_gxx": rank},
    )


def kdmd_eigenfunctions(model, theta):
    Th = np.asarray(theta, dtype=float)
    single = Th.ndim == 1
    if single:
        Th = Th[:, None]
    if Th.ndim != 2 or Th.shape[0] != model.p:
        raise InvalidInputError(f"theta must have {model.p} rows, got shape {np.shape(theta)}")
    phi = model.Xi.conj().T @ (model.R @ kernels.gram(model.kernel, Th, model.X_train))
    return phi[:, 0] if single else phi


def kdmd_predict(model, theta, t=2, k=None):
    """Truncated modal expansion ``sum_{i<=k} lambda_i^(t-1) phi_i(theta) mu_i`` (real part).

    ``k`` defaults to all m terms.
    """
    m = len(model.lambda_)
    k = m if k is None else k
    if int(k) != k or not 1 <= k <= m:
        raise InvalidInputError(f"k must be an integer in [1, {m}], got {k}")
    k = int(k)
    phi = kdmd_eigenfunctions(model, theta)
    pw = core._powers(model.lambda_[:k], t)
    nu = pw[:, None] * phi[:k] if phi.ndim == 2 else pw * phi[:k]
    out, _ = core._real_coefficients(model.modes[:, :k] @ nu)
    return out


def lowrank_dmd_fit(snapshots, k, rank_tol=DEFAULT_RANK_TOL):
    """Optimal rank-k linear DMD; predictions via ``core.predict`` are exact ``Y g``."""
    return core.fit(snapshots, kernels.Linear(), k, rank_tol)


_KDMD_ARRAYS = ("lambda_", "Xi", "R", "modes", "X_train")


def save_kdmd(model, directory, k=None):
    """Write the model; ``k`` is the truncation rank recorded for prediction."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for name in _KDMD_ARRAYS:
        arr = getattr(model, name)
        write_matrix(d / f"{name.rstrip('_')}.mat", arr[None, :] if arr.ndim == 1 else arr)
    write_matrix(d / "Gxx.mat", model.gram.Gxx)
    write_matrix(d / "Gyy.mat", model.gram.Gyy)
    write_matrix(d / "Gyx.mat", model.gram.Gyx)
    m = model.m
    write_manifest(
        d / "model.meta",
        {
            "method": "kdmd",
            "kernel": model.kernel.designation,
            "k": m if k is None else int(k),
            "k_eff": m,
            "p": model.p,
            "m": m,
            "rank_tol": repr(model.rank_tol),
        },
    )


def load_kdmd(directory):
    d = Path(directory)
    meta = read_manifest(d / "model.meta")
    arrays = {name: read_matrix(d / f"{name.rstrip('_')}.mat") for name in _KDMD_ARRAYS}
    kernel = kernels.parse_kernel(meta["kernel"])
    g = GramCache(read_matrix(d / "Gxx.mat"), read_matrix(d / "Gyy.mat"), read_matrix(d / "Gyx.mat"), kernel)
    return KdmdModel(
        lambda_=arrays["lambda_"][0].astype(complex),
        Xi=arrays["Xi"].astype(complex),
        R=arrays["R"],
        modes=arrays["modes"].astype(complex),
        gram=g,
        X_train=arrays["X_train"],
        kernel=kernel,
        rank_tol=float(meta["rank_tol"]),
    )
