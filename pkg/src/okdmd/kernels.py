"""Kernel families, Gram matrices and explicit feature maps.

A kernel ``h(y, z) = <Psi(y), Psi(z)>`` is all the reduced-model algorithms
ever see of the feature space. Explicit feature maps exist only to serve as
oracles in tests and in :mod:`okdmd.oracle`.

Column convention: vectors are columns, so ``gram(kernel, A, B)[i, j]`` is
``h(A[:, j], B[:, i])`` and ``gram(kernel, X, Y)`` realizes ``Y* X``.
"""

import contextlib
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import CapabilityError, CapacityError, DomainError, InvalidInputError

MAX_FEATURE_DIM = 10**6

__all__ = [
    "KernelSpec",
    "Polynomial",
    "Gaussian",
    "Logarithmic",
    "Linear",
    "parse_kernel",
    "evaluate",
    "gram",
    "feature_map",
    "count_evaluations",
]


class EvaluationCounter:
    def __init__(self):
        self.kernel = 0
        self.feature_map = 0


_active_counters = []


@contextlib.contextmanager
def count_evaluations():
    """Count kernel evaluations and feature-map calls made inside the block.

    >>> with count_evaluations() as c:
    ...     _ = evaluate(Linear(), [1.0], [2.0])
    >>> c.kernel
    1
    """
    counter = EvaluationCounter()
    _active_counters.append(counter)
    try:
        yield counter
    finally:
        _active_counters.remove(counter)


def _tick(kernel=0, features=0):
    for c in _active_counters:
        c.kernel += kernel
        c.feature_map += features


def _as_columns(A, name):
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2:
        raise InvalidInputError(f"{name} must be a vector or a matrix of column vectors")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError(f"{name} contains NaN or Inf entries")
    return A


class KernelSpec:
    """Base class of the kernel families. Instances are immutable values."""

    name = "kernel"

    @property
    def designation(self):
        return self.name

    def check_domain(self, A):
        pass

    def _gram(self, A, B):
        raise NotImplementedError

    def _features(self, A):
        raise CapabilityError(f"{self.designation} kernel has no explicit feature map")

    def feature_dim(self, p):
        raise CapabilityError(f"{self.designation} kernel has no explicit feature map")

    def __str__(self):
        return self.designation


@dataclass(frozen=True)
class Polynomial(KernelSpec):
    """``h(y, z) = (1 + y.z) ** gamma``."""

    gamma: int = 2
    name = "poly"

    def __post_init__(self):
        if int(self.gamma) != self.gamma or self.gamma < 1:
            raise InvalidInputError(f"polynomial degree must be a positive integer, got {self.gamma}")

    @property
    def designation(self):
        return f"poly:{self.gamma}"

    def _gram(self, A, B):
        return (1.0 + B.T @ A) ** self.gamma

    def feature_dim(self, p):
        return math.comb(p + self.gamma, self.gamma)

    def _monomials(self, p):
        # grouped by degree; within a degree, monomials over more distinct
        # variables come first, then lexicographic order
        out = []
        for d in range(self.gamma + 1):
            combos = list(itertools.combinations_with_replacement(range(p), d))
            combos.sort(key=lambda c: (-len(set(c)), c))
            out.extend(combos)
        return out

    def _features(self, A):
        p = A.shape[0]
        if self.feature_dim(p) > MAX_FEATURE_DIM:
            raise CapacityError(
                f"feature dimension {self.feature_dim(p)} exceeds cap {MAX_FEATURE_DIM}"
            )
        rows = []
        for combo in self._monomials(p):
            counts = np.bincount(np.asarray(combo, dtype=int), minlength=p) if combo else np.zeros(p, int)
            coef = math.factorial(self.gamma) / (
                math.factorial(self.gamma - len(combo)) * math.prod(math.factorial(c) for c in counts)
            )
            rows.append(math.sqrt(coef) * np.prod(A ** counts[:, None], axis=0))
        return np.array(rows)


@dataclass(frozen=True)
class Gaussian(KernelSpec):
    """``h(y, z) = exp(-|y - z|^2 / (2 sigma^2))``."""

    sigma: float = 1.0
    name = "gauss"

    def __post_init__(self):
        if not self.sigma > 0:
            raise InvalidInputError(f"Gaussian bandwidth must be positive, got {self.sigma}")

    @property
    def designation(self):
        return f"gauss:{self.sigma:g}"

    def _gram(self, A, B):
        sq = (
            np.sum(B * B, axis=0)[:, None]
            + np.sum(A * A, axis=0)[None, :]
            - 2.0 * (B.T @ A)
        )
        return np.exp(-np.clip(sq, 0.0, None) / (2.0 * self.sigma**2))


@dataclass(frozen=True)
class Logarithmic(KernelSpec):
    """``h(y, z) = log(1 + y) . log(1 + z)``, defined for entries > -1."""

    name = "log"

    def check_domain(self, A):
        bad = np.flatnonzero(np.any(A <= -1.0, axis=0))
        if bad.size:
            raise DomainError(
                f"log kernel needs all components > -1 (column {bad[0]})", column=int(bad[0])
            )

    def _gram(self, A, B):
        return np.log1p(B).T @ np.log1p(A)

    def feature_dim(self, p):
        return p

    def _features(self, A):
        return np.log1p(A)


@dataclass(frozen=True)
class Linear(KernelSpec):
    """``h(y, z) = y . z``; the identity feature map (plain low-rank DMD)."""

    name = "linear"

    def _gram(self, A, B):
        return B.T @ A

    def feature_dim(self, p):
        return p

    def _features(self, A):
        return A.copy()


def parse_kernel(spec):
    """Parse ``"poly:GAMMA"``, ``"gauss:SIGMA"``, ``"log"`` or ``"linear"``.

    A :class:`KernelSpec` instance is returned unchanged.
    """
    if isinstance(spec, KernelSpec):
        return spec
    if not isinstance(spec, str):
        raise InvalidInputError(f"cannot interpret {spec!r} as a kernel")
    name, _, arg = spec.strip().partition(":")
    name = name.lower()
    try:
        if name in ("poly", "polynomial"):
            gamma = float(arg) if arg else 2
            if gamma != int(gamma):
                raise InvalidInputError(f"polynomial degree must be an integer, got {arg}")
            return Polynomial(int(gamma))
        if name in ("gauss", "gaussian"):
            return Gaussian(float(arg) if arg else 1.0)
    except ValueError as exc:
        raise InvalidInputError(f"bad kernel parameter in {spec!r}") from exc
    if name in ("log", "logarithmic") and not arg:
        return Logarithmic()
    if name == "linear" and not arg:
        return Linear()
    raise InvalidInputError(f"unknown kernel designation {spec!r}")


def gram(kernel, A, B):
    """Gram matrix with entry ``(i, j) = h(A[:, j], B[:, i])``."""
    kernel = parse_kernel(kernel)
    A = _as_columns(A, "A")
    B = _as_columns(B, "B")
    if A.shape[0] != B.shape[0]:
        raise InvalidInputError(f"row dimensions differ: {A.shape[0]} vs {B.shape[0]}")
    kernel.check_domain(A)
    kernel.check_domain(B)
    _tick(kernel=A.shape[1] * B.shape[1])
    return kernel._gram(A, B)


def evaluate(kernel, y, z):
    y = np.asarray(y, dtype=float).ravel()
    z = np.asarray(z, dtype=float).ravel()
    if y.shape != z.shape:
        raise InvalidInputError(f"dimension mismatch: {y.shape} vs {z.shape}")
    return float(gram(kernel, y, z)[0, 0])


def feature_map(kernel, y):
    """Explicit feature vector(s); a matrix input maps column by column."""
    kernel = parse_kernel(kernel)
    Y = _as_columns(y, "y")
    kernel.check_domain(Y)
    _tick(features=Y.shape[1])
    F = kernel._features(Y)
    return F[:, 0] if np.ndim(y) == 1 else F
