"""Pre-images of feature-space combinations.

Given coefficients ``g`` and training successors ``Y`` (columns ``y_i``), the
pre-image of ``sum_i g_i Psi(y_i)`` is a minimizer over ``z`` of

    f(z) = h(z, z) - 2 sum_i g_i h(y_i, z),

which only needs kernel evaluations. :func:`solve_variational` minimizes it
with L-BFGS; :func:`closed_form` gives the exact inverse for the linear and
logarithmic kernels and the small-data approximations for the polynomial
and Gaussian kernels.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, root

from .exceptions import DomainError, InvalidInputError, NumericalFailureError
from .kernels import Gaussian, Linear, Logarithmic, Polynomial, _tick, parse_kernel

__all__ = [
    "PreimageProblem",
    "SolverOptions",
    "PreimageResult",
    "objective_and_gradient",
    "closed_form",
    "solve_variational",
]


@dataclass(frozen=True)
class PreimageProblem:
    g: np.ndarray
    Y: np.ndarray
    kernel: object

    def __post_init__(self):
        g = np.asarray(self.g)
        if np.iscomplexobj(g):
            g = g.real
        g = np.asarray(g, dtype=float).ravel()
        Y = np.asarray(self.Y, dtype=float)
        if Y.ndim != 2 or Y.shape[1] != g.size:
            raise InvalidInputError(f"Y must be p x {g.size}, got shape {Y.shape}")
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(Y))):
            raise InvalidInputError("pre-image data contains NaN or Inf")
        kernel = parse_kernel(self.kernel)
        kernel.check_domain(Y)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "kernel", kernel)


@dataclass(frozen=True)
class SolverOptions:
    max_iters: int = 500
    gradient_tolerance: float = 1e-9
    # None starts from the kernel's closed-form approximation
    initial_point: np.ndarray = None

    def __post_init__(self):
        if self.max_iters < 1 or not self.gradient_tolerance > 0:
            raise InvalidInputError("max_iters and gradient_tolerance must be positive")


@dataclass
class PreimageResult:
    x: np.ndarray
    converged: bool
    iterations: int = 0
    gradient_norm: float = 0.0
    objective: float = float("nan")
    message: str = ""
    info: dict = field(default_factory=dict)


def objective_and_gradient(prob, z):
    """Value and gradient of ``f(z) = h(z,z) - 2 sum_i g_i h(y_i, z)``."""
    z = np.asarray(z, dtype=float).ravel()
    Y, g, kern = prob.Y, prob.g, prob.kernel
    if z.size != Y.shape[0]:
        raise InvalidInputError(f"z has dimension {z.size}, expected {Y.shape[0]}")
    _tick(kernel=Y.shape[1] + 1)
    if isinstance(kern, Linear):
        target = Y @ g
        return float(z @ z - 2.0 * target @ z), 2.0 * z - 2.0 * target
    if isinstance(kern, Polynomial):
        gm = kern.gamma
        s = 1.0 + z @ z
        c = 1.0 + Y.T @ z
        f = s**gm - 2.0 * g @ c**gm
        grad = 2.0 * gm * s ** (gm - 1) * z - 2.0 * gm * Y @ (g * c ** (gm - 1))
        return float(f), grad
    if isinstance(kern, Gaussian):
        e = np.exp(-np.sum((Y - z[:, None]) ** 2, axis=0) / (2.0 * kern.sigma**2))
        f = 1.0 - 2.0 * g @ e
        grad = -(2.0 / kern.sigma**2) * (Y - z[:, None]) @ (g * e)
        return float(f), grad
    if isinstance(kern, Logarithmic):
        if np.any(z <= -1.0):
            raise DomainError("log kernel objective evaluated at a point with a component <= -1")
        u = np.log1p(z)
        target = np.log1p(Y) @ g
        return float(u @ u - 2.0 * target @ u), (2.0 * u - 2.0 * target) / (1.0 + z)
    raise InvalidInputError(f"unsupported kernel {kern}")


def closed_form(prob):
    """Closed-form pre-image.

    Exact for the linear (``Y g``) and logarithmic kernels
    (``prod_i (Y[j, i] + 1) ** g_i - 1`` per component); the small-data
    approximations ``Y g`` (polynomial) and ``Y g / sum(g)`` (Gaussian)
    otherwise.
    """
    Y, g, kern = prob.Y, prob.g, prob.kernel
    if isinstance(kern, (Linear, Polynomial)):
        return Y @ g
    if isinstance(kern, Gaussian):
        total = g.sum()
        if abs(total) <= 1e-12:
            raise NumericalFailureError(
                f"Gaussian pre-image normalizer is degenerate (sum of coefficients {total:.3e})"
            )
        return (Y @ g) / total
    if isinstance(kern, Logarithmic):
        return np.expm1(np.log1p(Y) @ g)
    raise InvalidInputError(f"unsupported kernel {kern}")


def _gaussian_weights(prob, z):
    return prob.g * np.exp(-np.sum((prob.Y - z[:, None]) ** 2, axis=0) / (2.0 * prob.kernel.sigma**2))


def _polish(prob, z, f, grad, bounded):
    # near a minimizer f stalls at rounding level before the gradient is
    # small; a root solve on the gradient alone finishes the job
    def gradient(w):
        if bounded and np.any(w <= -1.0):
            return np.full_like(w, 1e300)
        return objective_and_gradient(prob, w)[1]

    sol = root(gradient, z, method="hybr")
    if not np.all(np.isfinite(sol.x)) or (bounded and np.any(sol.x <= -1.0)):
        return z, f, grad, False
    f1, g1 = objective_and_gradient(prob, sol.x)
    if np.linalg.norm(g1) < np.linalg.norm(grad) and f1 <= f + 1e-12 * max(1.0, abs(f)):
        return sol.x, f1, g1, True
    return z, f, grad, False


def solve_variational(prob, opts=None):
    """Minimize the pre-image objective with L-BFGS.

    When the quasi-Newton run stops on a stalled objective before reaching
    the gradient tolerance, the point is refined by a root solve on the
    gradient; the refinement is kept only if it lowers the gradient norm
    without increasing the objective.

    The result always carries diagnostics; ``converged`` is true when
    ``|grad f| <= gradient_tolerance * max(1, |f|)`` at the returned point.
    Non-convergence returns the best iterate with ``converged=False``.
    """
    opts = opts or SolverOptions()
    kern = prob.kernel
    if opts.initial_point is not None:
        z0 = np.asarray(opts.initial_point, dtype=float).ravel()
    else:
        try:
            z0 = closed_form(prob)
        except NumericalFailureError:
            z0 = prob.Y @ prob.g
    bounds = None
    if isinstance(kern, Logarithmic):
        z0 = np.maximum(z0, -1.0 + 1e-12)
        bounds = [(-1.0 + 1e-12, None)] * z0.size

    # -log of the Gaussian sum is better conditioned where the sum is positive
    use_log_form = isinstance(kern, Gaussian) and _gaussian_weights(prob, z0).sum() > 0

    if use_log_form:
        def fun(z):
            _tick(kernel=prob.Y.shape[1])
            w = _gaussian_weights(prob, z)
            s = w.sum()
            if s <= 0:
                return 1e300, np.zeros_like(z)
            grad_s = (prob.Y - z[:, None]) @ w / kern.sigma**2
            return -np.log(s), -grad_s / s
    else:
        def fun(z):
            return objective_and_gradient(prob, z)

    f0, g0 = objective_and_gradient(prob, z0)
    scale = max(1.0, abs(f0))
    res = minimize(
        fun,
        z0,
        jac=True,
        method="L-BFGS-B",
        bounds=bounds,
        options={
            "maxiter": opts.max_iters,
            "gtol": 1e-3 * opts.gradient_tolerance * scale,
            "ftol": 1e-15,
            "maxcor": 20,
        },
    )
    z = res.x
    f, grad = objective_and_gradient(prob, z)
    if f0 < f:
        z, f, grad = z0, f0, g0
    polished = False
    if np.linalg.norm(grad) > opts.gradient_tolerance * max(1.0, abs(f)):
        z, f, grad, polished = _polish(prob, z, f, grad, bounds is not None)
    if not np.isfinite(f):
        raise NumericalFailureError("pre-image objective diverged")
    gnorm = float(np.linalg.norm(grad))
    converged = gnorm <= opts.gradient_tolerance * max(1.0, abs(f))
    return PreimageResult(
        x=z,
        converged=bool(converged),
        iterations=int(res.nit),
        gradient_norm=gnorm,
        objective=float(f),
        message=str(res.message),
        info={"log_form": bool(use_log_form), "evaluations": int(res.nfev), "polished": polished},
    )
