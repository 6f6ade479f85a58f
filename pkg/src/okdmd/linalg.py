"""Dense linear algebra: SVD, non-symmetric eigensolver, pseudo-inverse,
Gram-derived projectors and the plain-text matrix format.

Decompositions are delegated to LAPACK through numpy/scipy. This module adds
the thresholding, ordering and phase conventions the rest of the package
relies on for reproducible output.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from .exceptions import InvalidInputError, NumericalFailureError

DEFAULT_RANK_TOL = 1e-12

__all__ = [
    "DEFAULT_RANK_TOL",
    "SvdResult",
    "EigResult",
    "svd",
    "pseudo_inverse",
    "eig",
    "gram_factor",
    "projector_from_gram",
    "format_matrix",
    "parse_matrix",
    "read_matrix",
    "write_matrix",
]


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD ``M = U @ diag(sigma) @ V.conj().T``."""

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray

    def reconstruct(self):
        return (self.U * self.sigma) @ self.V.conj().T


@dataclass(frozen=True)
class EigResult:
    """Eigenvalues sorted by non-increasing modulus, unit-norm eigenvectors.

    ``left_vectors`` (when requested) satisfy ``w^* M = lambda w^*``.
    """

    values: np.ndarray
    vectors: np.ndarray
    left_vectors: np.ndarray = None


def as_matrix(M, name="matrix", square=False):
    """Validate a 2-D finite array and return it as a float/complex ndarray."""
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] < 1 or M.shape[1] < 1:
        raise InvalidInputError(f"{name} must be a non-empty 2-D array, got shape {M.shape}")
    if not np.issubdtype(M.dtype, np.number):
        raise InvalidInputError(f"{name} must be numeric")
    if not np.issubdtype(M.dtype, np.complexfloating):
        M = M.astype(float, copy=False)
    if not np.all(np.isfinite(M)):
        raise InvalidInputError(f"{name} contains NaN or Inf entries")
    if square and M.shape[0] != M.shape[1]:
        raise InvalidInputError(f"{name} must be square, got shape {M.shape}")
    return M


def svd(M):
    M = as_matrix(M)
    U, s, Vh = np.linalg.svd(M, full_matrices=False)
    return SvdResult(U=U, sigma=s, V=Vh.conj().T)


def pseudo_inverse(M, rank_tol=DEFAULT_RANK_TOL):
    """Moore-Penrose inverse; singular values ``<= rank_tol * sigma_1`` count as zero."""
    if rank_tol < 0:
        raise InvalidInputError("rank_tol must be non-negative")
    res = svd(M)
    s = res.sigma
    keep = s > rank_tol * s[0] if s[0] > 0 else np.zeros_like(s, dtype=bool)
    s_inv = np.zeros_like(s)
    s_inv[keep] = 1.0 / s[keep]
    return (res.V * s_inv) @ res.U.conj().T


def _phase_fix(vectors):
    # first non-negligible component becomes real positive
    out = vectors.copy()
    for j in range(out.shape[1]):
        v = out[:, j]
        mag = np.abs(v)
        idx = np.flatnonzero(mag > 1e-10 * mag.max())
        if idx.size == 0:
            continue
        c = v[idx[0]]
        out[:, j] = v * (np.conj(c) / abs(c))
        out[idx[0], j] = abs(c)
    return out


def _sort_order(values, real_input):
    if not real_input:
        return np.lexsort((-values.imag, -values.real, -np.abs(values)))
    # sort the upper-half-plane representatives, then place each conjugate
    # right after its partner so pairs stay adjacent
    reps = np.flatnonzero(values.imag >= 0)
    reps = reps[np.lexsort((-values[reps].imag, -values[reps].real, -np.abs(values[reps])))]
    lower = list(np.flatnonzero(values.imag < 0))
    order = []
    for i in reps:
        order.append(i)
        if values[i].imag > 0 and lower:
            target = np.conj(values[i])
            j = min(lower, key=lambda q: abs(values[q] - target))
            lower.remove(j)
            order.append(j)
    order.extend(lower)
    return np.asarray(order, dtype=int)


def eig(M, left=False):
    """Eigen-decomposition of a square (possibly non-symmetric) matrix.

    Ordering is deterministic: modulus descending, then real part descending,
    then imaginary part descending, with complex-conjugate pairs of a real
    matrix stored adjacently. Each eigenvector has unit 2-norm and its first
    non-negligible entry is real and positive.

    Raises:
        NumericalFailureError: if the QR iteration does not converge.
    """
    M = as_matrix(M, square=True)
    try:
        if left:
            w, W, V = scipy.linalg.eig(M, left=True, right=True, check_finite=False)
        else:
            w, V = scipy.linalg.eig(M, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalFailureError(
            f"eigenvalue iteration failed: {exc}", condition=np.linalg.cond(M)
        ) from exc
    w = w.astype(complex)
    V = V.astype(complex)
    V = V / np.linalg.norm(V, axis=0, keepdims=True)
    order = _sort_order(w, real_input=not np.iscomplexobj(M))
    W_sorted = None
    if left:
        W = W.astype(complex)
        W_sorted = _phase_fix((W / np.linalg.norm(W, axis=0, keepdims=True))[:, order])
    return EigResult(values=w[order], vectors=_phase_fix(V[:, order]), left_vectors=W_sorted)


def gram_factor(G, rank_tol=DEFAULT_RANK_TOL):
    """Factor a Gram matrix ``G = M* M`` as ``V diag(sigma**2) V*``.

    Returns ``(sigma, V)`` with ``sigma`` the singular values of ``M`` in
    non-increasing order. Eigenvalues of ``G`` at or below ``rank_tol``
    times the largest are reported as exact zeros.
    """
    G = _check_gram(G)
    vals, V = np.linalg.eigh(0.5 * (G + G.conj().T))
    vals, V = vals[::-1], V[:, ::-1]
    top = vals[0]
    keep = vals > rank_tol * top if top > 0 else np.zeros_like(vals, dtype=bool)
    sigma = np.where(keep, np.sqrt(np.clip(vals, 0.0, None)), 0.0)
    return sigma, V


def _check_gram(G, tol=1e-10):
    G = as_matrix(G, name="Gram matrix", square=True)
    scale = max(np.abs(G).max(), np.finfo(float).tiny)
    if np.abs(G - G.conj().T).max() > tol * scale:
        raise InvalidInputError("Gram matrix is not symmetric")
    vals = np.linalg.eigvalsh(0.5 * (G + G.conj().T))
    if vals[0] < -tol * max(abs(vals[-1]), np.finfo(float).tiny):
        raise InvalidInputError(
            f"Gram matrix is indefinite (smallest eigenvalue {vals[0]:.3e})"
        )
    return G


def projector_from_gram(G, rank_tol=DEFAULT_RANK_TOL):
    """Coordinate form of the projector ``M^+ M`` computed from ``G = M* M``."""
    sigma, V = gram_factor(G, rank_tol)
    Vk = V[:, sigma > 0]
    return Vk @ Vk.conj().T


def _format_entry(x):
    if isinstance(x, complex) or np.iscomplexobj(x):
        return f"{x.real:.17g}{x.imag:+.17g}i"
    return f"{x:.17g}"


def format_matrix(M):
    """Text form: ``rows cols`` header, then one whitespace-separated row per line."""
    M = as_matrix(M)
    cplx = np.iscomplexobj(M)
    lines = [f"{M.shape[0]} {M.shape[1]}"]
    for row in M:
        lines.append(" ".join(_format_entry(complex(x) if cplx else float(x)) for x in row))
    return "\n".join(lines) + "\n"


def _parse_entry(tok):
    if tok.endswith("i"):
        return complex(tok[:-1] + "j")
    return float(tok)


def parse_matrix(text):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise InvalidInputError("empty matrix text")
    try:
        rows, cols = (int(v) for v in lines[0].split())
    except ValueError as exc:
        raise InvalidInputError(f"bad matrix header {lines[0]!r}") from exc
    body = [ln.split() for ln in lines[1:]]
    if len(body) != rows or any(len(r) != cols for r in body):
        raise InvalidInputError(f"matrix body does not match header {rows}x{cols}")
    try:
        entries = [[_parse_entry(t) for t in r] for r in body]
    except ValueError as exc:
        raise InvalidInputError(f"bad matrix entry: {exc}") from exc
    cplx = any(t.endswith("i") for r in body for t in r)
    return as_matrix(np.array(entries, dtype=complex if cplx else float))


def read_matrix(path):
    return parse_matrix(Path(path).read_text())


def write_matrix(path, M):
    Path(path).write_text(format_matrix(M))
