"""Synthetic snapshots: divergence-free fractional fields advanced by a
quadratic map with periodic diffusion.

A state is a velocity field ``(u, v)`` on an ``n x n`` periodic grid,
flattened as ``concatenate([u.ravel(), v.ravel()])`` so ``p = 2 n^2``.
"""

from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .core import SnapshotSet, read_manifest, write_manifest
from .exceptions import GenerationError, InvalidInputError
from .linalg import read_matrix, write_matrix

__all__ = [
    "GridSpec",
    "GenConfig",
    "laplacian",
    "quadratic_step",
    "sample_initial",
    "divergence",
    "generate_dataset",
    "save_dataset",
    "load_dataset",
    "desk_config",
]


@dataclass(frozen=True)
class GridSpec:
    n: int = 8

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise InvalidInputError(f"grid side must be an integer >= 2, got {self.n}")

    @property
    def p(self):
        return 2 * self.n * self.n


@dataclass(frozen=True)
class GenConfig:
    N: int = 20
    T: int = 2
    alpha: float = 0.5
    hurst: float = 1.0 / 3.0
    noise_std: float = 1e-6
    target_scale: float = 1e-2
    seed: int = 0
    # number of retained real stream-function coefficients; None keeps all
    modes: int = None

    def __post_init__(self):
        if self.N < 1 or self.T < 2:
            raise InvalidInputError("need N >= 1 and T >= 2")
        if not 0 < self.hurst < 1:
            raise InvalidInputError("Hurst exponent must lie in (0, 1)")
        if self.noise_std < 0 or not self.target_scale > 0:
            raise InvalidInputError("noise_std must be >= 0 and target_scale > 0")
        if self.modes is not None and self.modes < 1:
            raise InvalidInputError("modes must be a positive integer")


def desk_config(**overrides):
    """Desk-scale setup: 8 x 8 grid (p = 128), 20 pairs, T = 2."""
    return GridSpec(overrides.pop("n", 8)), GenConfig(**overrides)


def _laplacian_1component(n):
    N = n * n
    idx = np.arange(N).reshape(n, n)
    L = np.zeros((N, N))
    L[idx.ravel(), idx.ravel()] = -4.0
    for shift, axis in ((1, 0), (-1, 0), (1, 1), (-1, 1)):
        nb = np.roll(idx, shift, axis=axis).ravel()
        np.add.at(L, (idx.ravel(), nb), 1.0)
    return L


def laplacian(grid):
    """Periodic 5-point Laplacian applied to each velocity component (dense ``p x p``)."""
    L1 = _laplacian_1component(grid.n)
    Z = np.zeros_like(L1)
    return np.block([[L1, Z], [Z, L1]])


def quadratic_step(x, alpha, L):
    """``(x + 1)**2 + alpha * L @ x - 1`` with the square taken component-wise."""
    x = np.asarray(x, dtype=float)
    return (x + 1.0) ** 2 + alpha * (L @ x) - 1.0


def _ddx(f, axis):
    return 0.5 * (np.roll(f, -1, axis=axis) - np.roll(f, 1, axis=axis))


def divergence(field, n):
    """Periodic central-difference divergence of a flattened ``(u, v)`` field."""
    u, v = np.asarray(field).reshape(2, n, n)
    return _ddx(u, 0) + _ddx(v, 1)


def _mode_table(n):
    # one representative per conjugate pair of wavenumbers whose central
    # difference symbol does not vanish, in order of increasing |kappa|
    rows = []
    for a in range(n):
        for b in range(n):
            ca, cb = (-a) % n, (-b) % n
            if (a, b) >= (ca, cb):
                continue
            k1 = a if a <= n // 2 else a - n
            k2 = b if b <= n // 2 else b - n
            d2 = np.sin(2 * np.pi * a / n) ** 2 + np.sin(2 * np.pi * b / n) ** 2
            if d2 < 1e-12:
                continue
            rows.append((k1 * k1 + k2 * k2, a, b, d2))
    rows.sort()
    return rows


def sample_initial(grid, hurst, seed=None, modes=None):
    """Random divergence-free field with power spectrum ``~ |kappa|^-(2H+2)``.

    The field is the central-difference curl of a random stream function;
    the stream-function amplitudes compensate the difference operator so
    that the velocity spectrum follows the power law exactly in
    expectation. ``modes`` keeps only the first real coefficients
    (lowest wavenumbers first), bounding the intrinsic dimension.
    """
    rng = np.random.default_rng(seed)
    n = grid.n
    table = _mode_table(n)
    coef = rng.standard_normal((len(table), 2))
    if modes is not None:
        flat = coef.ravel()
        flat[modes:] = 0.0
        coef = flat.reshape(-1, 2)
    spec = np.zeros((n, n), dtype=complex)
    for (kk, a, b, d2), (ca, cb) in zip(table, coef):
        amp = kk ** (-(hurst + 1.0) / 2.0) / np.sqrt(d2)
        c = 0.5 * amp * (ca - 1j * cb) * n * n
        spec[a, b] = c
        spec[(-a) % n, (-b) % n] = np.conj(c)
    psi = np.fft.ifft2(spec).real
    u = _ddx(psi, 1)
    v = -_ddx(psi, 0)
    return np.concatenate([u.ravel(), v.ravel()])


def _rollout(x1, T, alpha, L):
    traj = [x1]
    for _ in range(T - 1):
        traj.append(quadratic_step(traj[-1], alpha, L))
    return np.array(traj)


def _generate_set(grid, cfg, seq, L):
    fields, noise = [], []
    for child in seq.spawn(cfg.N):
        rng = np.random.default_rng(child)
        fields.append(sample_initial(grid, cfg.hurst, rng, cfg.modes))
        noise.append(rng.normal(0.0, cfg.noise_std, grid.p) if cfg.noise_std > 0 else np.zeros(grid.p))
    fields, noise = np.array(fields), np.array(noise)

    def excess(s):
        x2 = quadratic_step((s * fields + noise).T, cfg.alpha, L)
        return np.median(np.linalg.norm(x2, axis=0)) - cfg.target_scale

    lo = 0.0
    if excess(lo) >= 0:
        raise GenerationError("noise alone already exceeds the target scale")
    hi = cfg.target_scale / max(np.median(np.linalg.norm(fields, axis=1)), 1e-300)
    for _ in range(200):
        if excess(hi) > 0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise GenerationError("could not bracket the rescaling factor")
    s = brentq(excess, lo, hi, xtol=1e-14 * hi, rtol=1e-12)
    if abs(excess(s)) > 0.05 * cfg.target_scale:
        raise GenerationError("rescaling did not reach the target scale")
    traj = np.array([_rollout(x, cfg.T, cfg.alpha, L) for x in s * fields + noise])
    return SnapshotSet.from_trajectories(traj), s


def generate_dataset(grid, cfg):
    """Independent training and testing snapshot sets.

    Initial conditions are scaled by one scalar per set so that the median
    norm of the second snapshot equals ``cfg.target_scale``, then corrupted
    by white noise of standard deviation ``cfg.noise_std``.

    Returns:
        tuple: ``(train, test)`` :class:`~okdmd.core.SnapshotSet` objects.
    """
    L = laplacian(grid)
    train_seq, test_seq = np.random.SeedSequence(cfg.seed).spawn(2)
    train, _ = _generate_set(grid, cfg, train_seq, L)
    test, _ = _generate_set(grid, cfg, test_seq, L)
    return train, test


def save_dataset(directory, train, test=None, grid=None, cfg=None):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_matrix(d / "X.mat", train.X)
    write_matrix(d / "Y.mat", train.Y)
    if test is not None:
        write_matrix(d / "X_test.mat", test.X)
        write_matrix(d / "Y_test.mat", test.Y)
    if cfg is not None:
        meta = {"n": grid.n if grid else ""}
        meta.update({k: ("" if v is None else v) for k, v in asdict(cfg).items()})
        write_manifest(d / "gen.meta", {k: repr(v) if isinstance(v, float) else v for k, v in meta.items()})


def load_dataset(directory):
    """Load ``(train, test)``; ``test`` is ``None`` when the directory has no test set."""
    d = Path(directory)
    if not (d / "X.mat").exists():
        raise InvalidInputError(f"{d} does not contain X.mat")
    train = SnapshotSet(read_matrix(d / "X.mat"), read_matrix(d / "Y.mat"))
    test = None
    if (d / "X_test.mat").exists():
        test = SnapshotSet(read_matrix(d / "X_test.mat"), read_matrix(d / "Y_test.mat"))
    return train, test


def load_gen_meta(directory):
    path = Path(directory) / "gen.meta"
    return read_manifest(path) if path.exists() else {}
