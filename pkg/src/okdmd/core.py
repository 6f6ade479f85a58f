"""Optimal kernel-based DMD (OK-DMD).

The optimal rank-k operator on the feature space, ``A = P P* Y X^+`` with
``P`` the leading k left singular vectors of ``Z = Y P_{X*}``, is never
formed. Its eigen-triples are represented by m-vectors (``m`` = number of
snapshot pairs) built from the three Gram matrices ``X*X``, ``Y*Y`` and
``Y*X``, so fitting costs O(m^2 (m + p)) whatever the feature dimension.

Matrices here follow the column convention: ``X`` and ``Y`` are ``p x m``
with one snapshot per column.
"""

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .exceptions import (
    ConjugacyWarning,
    DegenerateEigenpairError,
    HorizonOverflowError,
    InvalidInputError,
    NumericalFailureError,
)
from .linalg import as_matrix, eig, gram_factor, projector_from_gram, read_matrix, write_matrix
from .preimage import PreimageProblem, SolverOptions, closed_form, solve_variational

DEFAULT_RANK_TOL = 1e-10
PAIRING_TOL = 1e-6
CONJUGACY_TOL = 1e-6

__all__ = [
    "SnapshotSet",
    "GramCache",
    "SmallMatrices",
    "ReducedModel",
    "build_gram",
    "z_gram",
    "small_matrices",
    "fit",
    "eigenfunctions",
    "coefficient_vector",
    "predict",
    "save_model",
    "load_model",
]


@dataclass(frozen=True)
class SnapshotSet:
    """Paired snapshot matrices; column i of ``Y`` is the successor of column i of ``X``."""

    X: np.ndarray
    Y: np.ndarray
    provenance: tuple = None

    def __post_init__(self):
        X = as_matrix(self.X, "X")
        Y = as_matrix(self.Y, "Y")
        if np.iscomplexobj(X) or np.iscomplexobj(Y):
            raise InvalidInputError("snapshots must be real")
        if X.shape != Y.shape:
            raise InvalidInputError(f"X and Y shapes differ: {X.shape} vs {Y.shape}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def p(self):
        return self.X.shape[0]

    @property
    def m(self):
        return self.X.shape[1]

    @classmethod
    def from_trajectories(cls, trajectories):
        """Build from an array of shape ``(N, T, p)``.

        Column ``(T-1)*i + j`` of ``X`` holds ``x_j`` of trajectory ``i``
        and the same column of ``Y`` holds ``x_{j+1}`` (0-based).
        """
        traj = np.asarray(trajectories, dtype=float)
        if traj.ndim != 3 or traj.shape[1] < 2:
            raise InvalidInputError("trajectories must have shape (N, T>=2, p)")
        N, T, p = traj.shape
        X = traj[:, :-1, :].reshape(N * (T - 1), p).T
        Y = traj[:, 1:, :].reshape(N * (T - 1), p).T
        return cls(X, Y, provenance=(N, T))


@dataclass(frozen=True)
class GramCache:
    Gxx: np.ndarray
    Gyy: np.ndarray
    Gyx: np.ndarray
    kernel: kernels.KernelSpec


@dataclass(frozen=True)
class SmallMatrices:
    """m x m matrices whose eigen-decompositions give the reduced model."""

    a_left_star: np.ndarray
    a_right: np.ndarray
    R: np.ndarray
    C: np.ndarray
    E: np.ndarray
    S: np.ndarray
    k_eff: int


@dataclass(frozen=True)
class ReducedModel:
    k: int
    k_eff: int
    lambda_: np.ndarray
    Xi: np.ndarray
    Zeta: np.ndarray
    R: np.ndarray
    C: np.ndarray
    E: np.ndarray
    gram: GramCache
    X_train: np.ndarray
    Y_train: np.ndarray
    kernel: kernels.KernelSpec
    rank_tol: float = DEFAULT_RANK_TOL
    info: dict = field(default_factory=dict, compare=False)

    @property
    def p(self):
        return self.X_train.shape[0]

    @property
    def m(self):
        return self.X_train.shape[1]


def build_gram(snapshots, kernel):
    """Gram matrices ``X*X``, ``Y*Y`` and ``Y*X`` via the kernel trick (3 m^2 evaluations)."""
    kernel = kernels.parse_kernel(kernel)
    X, Y = snapshots.X, snapshots.Y
    return GramCache(
        Gxx=kernels.gram(kernel, X, X),
        Gyy=kernels.gram(kernel, Y, Y),
        Gyx=kernels.gram(kernel, X, Y),
        kernel=kernel,
    )


def z_gram(g, rank_tol=DEFAULT_RANK_TOL):
    """``Z*Z`` for ``Z = Y P_{X*}``, i.e. ``P Gyy P`` with ``P`` the projector from ``Gxx``."""
    P = projector_from_gram(g.Gxx, rank_tol)
    ZZ = P @ g.Gyy @ P
    return 0.5 * (ZZ + ZZ.T)


def small_matrices(g, k, rank_tol=DEFAULT_RANK_TOL):
    """Assemble the left/right eigen-problems and the auxiliary matrices.

    If ``Z*Z`` has numerical rank ``r < k`` the rank is silently reduced to
    ``k_eff = min(k, r)``.
    """
    m = g.Gxx.shape[0]
    if int(k) != k or k < 1:
        raise InvalidInputError(f"rank k must be a positive integer, got {k}")
    sx, Vx = gram_factor(g.Gxx, rank_tol)
    sx_inv = np.divide(1.0, sx, out=np.zeros_like(sx), where=sx > 0)
    R = sx_inv[:, None] * Vx.T
    Px = Vx[:, sx > 0] @ Vx[:, sx > 0].T

    ZZ = Px @ g.Gyy @ Px
    sz, Vz = gram_factor(0.5 * (ZZ + ZZ.T), rank_tol)
    k_eff = int(min(k, np.count_nonzero(sz > 0), m))
    d = np.zeros(m)
    d[:k_eff] = 1.0 / sz[:k_eff]

    S = Px @ (Vz * d**2) @ Vz.T @ Px
    C = d[:, None] * (Vz.T @ Px)
    Py = projector_from_gram(g.Gyy, rank_tol)
    # only the leading k_eff rows matter: right eigenvectors live there
    E = d[:, None] * (Vz.T @ Px @ Py @ g.Gyx @ R.T)

    a_left_star = R @ g.Gyy @ S @ g.Gyx @ R.T
    a_right = C @ g.Gyy @ R.T @ R @ g.Gyx.T @ C.T
    return SmallMatrices(a_left_star, a_right, R, C, E, S, k_eff)


def _pair_spectra(right_vals, left_vals, scale):
    # an eigenvector of A_left_star for mu is a left eigenvector of the
    # operator for conj(mu); match each right eigenvalue against conj(mu)
    available = list(range(len(left_vals)))
    pairs = []
    for lam in right_vals:
        j = min(available, key=lambda q: abs(np.conj(left_vals[q]) - lam))
        gap = abs(np.conj(left_vals[j]) - lam)
        if gap > PAIRING_TOL * scale:
            raise NumericalFailureError(
                f"left/right spectra disagree: no left eigenvalue within {gap:.3e} of {lam:.6g}"
            )
        available.remove(j)
        pairs.append(j)
    return np.asarray(pairs, dtype=int)


def _biorthonormalize(Zeta, Xi, E, lam):
    # rescale right vectors so that zeta_i^* E xi_j = delta_ij; clusters of
    # (numerically) repeated eigenvalues are handled block-wise
    B = Zeta.conj().T @ E @ Xi
    scale = max(abs(lam[0]), np.finfo(float).tiny)
    k = len(lam)
    done = np.zeros(k, dtype=bool)
    Zeta = Zeta.copy()
    for i in range(k):
        if done[i]:
            continue
        idx = np.flatnonzero((np.abs(lam - lam[i]) <= PAIRING_TOL * scale) & ~done)
        done[idx] = True
        Bc = B[np.ix_(idx, idx)]
        if idx.size == 1:
            b = Bc[0, 0]
            if abs(b) < 1e-12:
                raise DegenerateEigenpairError(
                    f"eigenpair {i} cannot be normalized (zeta* E xi = {abs(b):.3e})", index=int(i)
                )
            Zeta[:, i] = Zeta[:, i] / np.conj(b)
            continue
        sv = np.linalg.svd(Bc, compute_uv=False)
        if sv[-1] < 1e-12 * max(sv[0], 1.0):
            raise DegenerateEigenpairError(
                f"repeated eigenvalue cluster at index {i} cannot be normalized", index=int(i)
            )
        Zeta[:, idx] = Zeta[:, idx] @ np.linalg.inv(Bc).conj().T
    return Zeta


def fit(snapshots, kernel, k, rank_tol=DEFAULT_RANK_TOL):
    """Fit the optimal rank-k reduced model from Gram data only.

    Args:
        snapshots: :class:`SnapshotSet` with ``p x m`` matrices.
        kernel: kernel designation or :class:`~okdmd.kernels.KernelSpec`.
        k: requested rank.
        rank_tol: relative eigenvalue threshold used for every Gram
            factorization.

    Returns:
        ReducedModel: eigenvalues ``lambda_`` (modulus-sorted), left vectors
        ``Xi`` (unit norm) and right vectors ``Zeta`` rescaled so that
        ``Zeta[:, i]^* E Xi[:, i] = 1``.
    """
    kernel = kernels.parse_kernel(kernel)
    g = build_gram(snapshots, kernel)
    mats = small_matrices(g, k, rank_tol)

    right = eig(mats.a_right, left=True)
    lam_all = right.values
    top = abs(lam_all[0])
    if mats.k_eff == 0 or top == 0:
        raise NumericalFailureError("reduced operator has no non-zero eigenvalue")
    n_sel = int(np.count_nonzero(np.abs(lam_all[: mats.k_eff]) > rank_tol * top))
    lam = lam_all[:n_sel]
    Zeta = right.vectors[:, :n_sel]
    # Left vectors are mapped from the left eigenvectors of the same
    # right matrix (xi = R Gyy C^T w / conj(lambda)); separately computed
    # eigenvectors of a_left_star lose biorthogonality inside the
    # near-degenerate clusters produced by symmetric dynamics.
    W = right.left_vectors[:, :n_sel]
    Xi = (mats.R @ g.Gyy @ mats.C.T @ W) / np.conj(lam)
    Xi = Xi / np.linalg.norm(Xi, axis=0, keepdims=True)
    _pair_spectra(lam, eig(mats.a_left_star).values, top)
    Zeta = _biorthonormalize(Zeta, Xi, mats.E, lam)

    return ReducedModel(
        k=int(k),
        k_eff=n_sel,
        lambda_=lam,
        Xi=Xi,
        Zeta=Zeta,
        R=mats.R,
        C=mats.C,
        E=mats.E,
        gram=g,
        X_train=snapshots.X,
        Y_train=snapshots.Y,
        kernel=kernel,
        rank_tol=rank_tol,
        info={"k_eff_gram": mats.k_eff},
    )


def _theta_columns(model, theta):
    theta = np.asarray(theta, dtype=float)
    single = theta.ndim == 1
    Th = theta[:, None] if single else theta
    if Th.ndim != 2 or Th.shape[0] != model.p:
        raise InvalidInputError(f"theta must have {model.p} rows, got shape {theta.shape}")
    return Th, single


def eigenfunctions(model, theta):
    """Eigenfunction values ``phi_i(theta) = Xi_i^* R (X* Psi(theta))``.

    ``theta`` is a p-vector (returns a k_eff-vector) or a ``p x n`` matrix
    (returns ``k_eff x n``).
    """
    Th, single = _theta_columns(model, theta)
    kx = kernels.gram(model.kernel, Th, model.X_train)
    phi = model.Xi.conj().T @ (model.R @ kx)
    return phi[:, 0] if single else phi


def _powers(lam, t):
    if int(t) != t or t < 1:
        raise InvalidInputError(f"time index must be an integer >= 1, got {t}")
    with np.errstate(divide="ignore"):
        logmag = (t - 1) * np.log(np.abs(lam))
    bad = np.flatnonzero(logmag > np.log(1e300))
    if bad.size:
        raise HorizonOverflowError(
            f"|lambda_{bad[0]}|^{t - 1} exceeds 1e300", index=int(bad[0]), t=int(t)
        )
    return lam ** (t - 1)


def coefficient_vector(model, theta, t, phi=None):
    """Coefficients ``g`` such that the model state at time ``t`` is ``Psi^{-1}(Y g)``."""
    if phi is None:
        phi = eigenfunctions(model, theta)
    pw = _powers(model.lambda_, t)
    nu = pw[:, None] * phi if phi.ndim == 2 else pw * phi
    return model.C.T @ (model.Zeta @ nu)


def _real_coefficients(G):
    re = np.linalg.norm(G.real)
    im = np.linalg.norm(G.imag)
    if im > CONJUGACY_TOL * max(re, np.finfo(float).tiny):
        warnings.warn(
            f"imaginary residual {im:.3e} vs real norm {re:.3e} in reconstruction",
            ConjugacyWarning,
            stacklevel=3,
        )
    return G.real, im / max(re, np.finfo(float).tiny)


def predict(model, theta, t=2, inverse_mode="closed_form", solver_options=None, diagnostics=None):
    """Reduced-model approximation of the state at time ``t`` from ``theta``.

    Args:
        inverse_mode: ``"closed_form"`` (exact for log/linear kernels) or
            ``"variational"``.
        diagnostics: optional list; one pre-image result per column is
            appended to it.

    Returns:
        Real p-vector, or ``p x n`` matrix for a matrix ``theta``.
    """
    if inverse_mode in ("closed", "closed_form"):
        inverse_mode = "closed_form"
    elif inverse_mode != "variational":
        raise InvalidInputError(f"unknown inverse mode {inverse_mode!r}")
    Th, single = _theta_columns(model, theta)
    G = coefficient_vector(model, Th, t)
    Gr, _ = _real_coefficients(G)
    out = np.empty((model.p, Gr.shape[1]))
    for j in range(Gr.shape[1]):
        prob = PreimageProblem(Gr[:, j], model.Y_train, model.kernel)
        if inverse_mode == "closed_form":
            out[:, j] = closed_form(prob)
        else:
            res = solve_variational(prob, solver_options or SolverOptions())
            out[:, j] = res.x
            if diagnostics is not None:
                diagnostics.append(res)
    return out[:, 0] if single else out


_OKDMD_ARRAYS = ("lambda_", "Xi", "Zeta", "R", "C", "E", "X_train", "Y_train")


def write_manifest(path, entries):
    Path(path).write_text("".join(f"{k}={v}\n" for k, v in entries.items()))


def read_manifest(path):
    out = {}
    for line in Path(path).read_text().splitlines():
        if line.strip():
            key, _, val = line.partition("=")
            out[key.strip()] = val.strip()
    return out


def save_model(model, directory, method="okdmd"):
    """Write the model as matrix text files plus a ``model.meta`` manifest."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for name in _OKDMD_ARRAYS:
        arr = getattr(model, name)
        write_matrix(d / f"{name.rstrip('_')}.mat", arr[None, :] if arr.ndim == 1 else arr)
    write_matrix(d / "Gxx.mat", model.gram.Gxx)
    write_matrix(d / "Gyy.mat", model.gram.Gyy)
    write_matrix(d / "Gyx.mat", model.gram.Gyx)
    write_manifest(
        d / "model.meta",
        {
            "method": method,
            "kernel": model.kernel.designation,
            "k": model.k,
            "k_eff": model.k_eff,
            "p": model.p,
            "m": model.m,
            "rank_tol": repr(model.rank_tol),
        },
    )


def load_model(directory):
    d = Path(directory)
    meta = read_manifest(d / "model.meta")
    arrays = {name: read_matrix(d / f"{name.rstrip('_')}.mat") for name in _OKDMD_ARRAYS}
    kernel = kernels.parse_kernel(meta["kernel"])
    lam = arrays.pop("lambda_")[0].astype(complex)
    g = GramCache(read_matrix(d / "Gxx.mat"), read_matrix(d / "Gyy.mat"), read_matrix(d / "Gyx.mat"), kernel)
    return ReducedModel(
        k=int(meta["k"]),
        k_eff=int(meta["k_eff"]),
        lambda_=lam,
        Xi=arrays["Xi"].astype(complex),
        Zeta=arrays["Zeta"].astype(complex),
        R=arrays["R"],
        C=arrays["C"],
        E=arrays["E"],
        gram=g,
        X_train=arrays["X_train"],
        Y_train=arrays["Y_train"],
        kernel=kernel,
        rank_tol=float(meta["rank_tol"]),
    )
