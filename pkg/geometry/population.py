"""
Population geometry.

Everything here is a deterministic functional of (model, true distribution):
the log loss L(w) = -E_X[log p(X|w)], its minimiser w0, the matrices
I(w0) and J(w0), and the constants S, lambda, nu, mu and TIC built from them.
All E_X integrals use adaptive quadrature on the true distribution's
support.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from config.exceptions import InvalidInput, MultipleMinima, SingularInformation
from config.utils.optimization import newton_minimize
from config.utils.quadrature import integrate_scalar, integrate_vector

logger = logging.getLogger(__name__)

# Eigenvalues of J at or below this make a scenario singular.
POSITIVE_DEFINITE_FLOOR = 1e-8

GRADIENT_TOLERANCE = 1e-8
MAX_NEWTON_ITERATIONS = 100

MULTI_START_POINTS = 8
# Starts that end further apart than this mean L has several minimisers.
MULTI_START_REJECT = 1e-4
MULTI_START_AGREE = 1e-6


# =============================================================================
# Records
# =============================================================================


@dataclass(frozen=True)
class OptimalPoint:
    w0: np.ndarray
    L_at_w0: float
    grad_norm: float
    newton_iterations: int
    start_spread: float = 0.0

    @property
    def d(self):
        return int(self.w0.size)


@dataclass(frozen=True)
class InformationPair:
    """
    I(w0) = E_X[grad log p grad log p^T], J(w0) = -E_X[hess log p], Q = I - J.
    """

    I: np.ndarray
    J: np.ndarray
    Q: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "Q", self.I - self.J)

    @property
    def j_inverse(self):
        return np.linalg.inv(self.J)

    @property
    def sandwich(self):
        """J^-1 I J^-1, the asymptotic covariance of sqrt(n)(w_hat - w0)."""
        j_inverse = self.j_inverse
        return j_inverse @ self.I @ j_inverse

    def min_eigenvalue_J(self):
        return float(np.linalg.eigvalsh(self.J).min())


@dataclass(frozen=True)
class AsymptoticConstants:
    S: float
    lambda_: float
    nu: float
    mu: float
    tic: float
    d: int

    def as_dict(self):
        return {
            "S": self.S,
            "lambda": self.lambda_,
            "nu": self.nu,
            "mu": self.mu,
            "tic": self.tic,
        }


# =============================================================================
# Loss and derivatives
# =============================================================================


def _point(x):
    return np.atleast_1d(np.asarray(x, dtype=float))


def log_loss(model, true_dist, w):
    """
    L(w) = -integral q(x) log p(x|w) dx.

    Raises:
        QuadratureFailure
    """
    w = np.asarray(w, dtype=float)
    lower, upper = true_dist.support
    return -integrate_scalar(
        lambda x: float(model.log_density(_point(x), w)[0]) * true_dist.density(x),
        lower,
        upper,
        points=true_dist.breakpoints,
    )


def loss_gradient(model, true_dist, w):
    w = np.asarray(w, dtype=float)
    lower, upper = true_dist.support
    return -integrate_vector(
        lambda x: model.grad_w(_point(x), w)[0] * true_dist.density(x),
        lower,
        upper,
        points=true_dist.breakpoints,
    )


def loss_hessian(model, true_dist, w):
    """Hessian of L at w; equals J(w)."""
    w = np.asarray(w, dtype=float)
    lower, upper = true_dist.support
    hessian = -integrate_vector(
        lambda x: model.hess_w(_point(x), w)[0] * true_dist.density(x),
        lower,
        upper,
        points=true_dist.breakpoints,
    )
    return 0.5 * (hessian + hessian.T)


# =============================================================================
# Optimal parameter
# =============================================================================


def multi_start_points(param_box, count=MULTI_START_POINTS):
    """
    Deterministic Halton points in the central quarter of the box.
    """
    param_box = np.asarray(param_box, dtype=float)
    centre = param_box.mean(axis=1)
    half_width = (param_box[:, 1] - param_box[:, 0]) / 8.0
    sampler = qmc.Halton(d=param_box.shape[0], scramble=False)
    # the first unscrambled Halton point is the origin of the unit cube
    unit = sampler.random(count + 1)[1:]
    return centre + (2.0 * unit - 1.0) * half_width


def find_optimal_parameter(model, true_dist, init=None, starts=MULTI_START_POINTS):
    """
    Minimise L by Newton iteration and confirm the minimiser is unique.

    Args:
        init: starting point; the centre of ``model.param_box`` when omitted.
        starts: number of extra deterministic starts for the uniqueness check.

    Raises:
        InvalidInput: ``init`` lies outside ``model.param_box``.
        NoConvergence: Newton did not reach |grad L| <= 1e-8.
        MultipleMinima: two starts ended more than 1e-4 apart.
    """
    box = model.param_box
    if init is None:
        init = box.mean(axis=1)
    elif not model.contains(init):
        raise InvalidInput(f"initial point {np.asarray(init)} lies outside {model.id} param_box")

    def solve(x0):
        return newton_minimize(
            lambda w: log_loss(model, true_dist, w),
            lambda w: loss_gradient(model, true_dist, w),
            lambda w: loss_hessian(model, true_dist, w),
            x0,
            bounds=box,
            tol=GRADIENT_TOLERANCE,
            max_iter=MAX_NEWTON_ITERATIONS,
        )

    result = solve(init)

    spread = 0.0
    for start in multi_start_points(box, starts) if starts else ():
        other = solve(start)
        spread = max(spread, float(np.max(np.abs(other.x - result.x))))
        if spread > MULTI_START_REJECT:
            raise MultipleMinima(
                f"starts {np.array2string(np.asarray(init))} and "
                f"{np.array2string(start)} reached minimisers {spread:.3e} apart"
            )
    if spread > MULTI_START_AGREE:
        logger.warning(
            "Multi-start minimisers for %s/%s agree only to %.2e", model.id, true_dist.id, spread
        )

    logger.debug(
        "w0 for %s/%s = %s after %d iterations",
        model.id,
        true_dist.id,
        result.x,
        result.iterations,
    )
    return OptimalPoint(
        w0=result.x,
        L_at_w0=result.value,
        grad_norm=result.grad_norm,
        newton_iterations=result.iterations,
        start_spread=spread,
    )


# =============================================================================
# Information matrices and constants
# =============================================================================


def information_matrices(model, true_dist, w0):
    """
    I(w0) and J(w0) by quadrature.

    Raises:
        QuadratureFailure
    """
    w0 = np.asarray(w0, dtype=float)
    lower, upper = true_dist.support

    def integrand(x):
        x = _point(x)
        gradient = model.grad_w(x, w0)[0]
        hessian = model.hess_w(x, w0)[0]
        return np.stack([np.outer(gradient, gradient), -hessian]) * true_dist.density(x[0])

    I, J = integrate_vector(integrand, lower, upper, points=true_dist.breakpoints)
    return InformationPair(I=0.5 * (I + I.T), J=0.5 * (J + J.T))


def asymptotic_constants(optimal, pair):
    """
    S = L(w0), lambda = d/2, nu = tr(IJ^-1)/2, mu = tr(IJ^-1 IJ^-1)/2, TIC = tr(IJ^-1).

    Raises:
        SingularInformation: J cannot be inverted.
    """
    d = pair.J.shape[0]
    if pair.min_eigenvalue_J() <= POSITIVE_DEFINITE_FLOOR:
        raise SingularInformation(f"smallest eigenvalue of J is {pair.min_eigenvalue_J():.3e}")
    try:
        ij_inverse = pair.I @ np.linalg.inv(pair.J)
    except np.linalg.LinAlgError as exc:
        raise SingularInformation(str(exc)) from exc

    tic = float(np.trace(ij_inverse))
    return AsymptoticConstants(
        S=float(optimal.L_at_w0),
        lambda_=d / 2.0,
        nu=tic / 2.0,
        mu=float(np.trace(ij_inverse @ ij_inverse)) / 2.0,
        tic=tic,
        d=d,
    )


def monte_carlo_information(model, true_dist, w0, rng, count, chunk=1_000_000):
    """
    Sample-mean estimates of I and J with their entrywise standard errors.

    Used as an independent oracle for the quadrature values.
    """
    w0 = np.asarray(w0, dtype=float)
    d = w0.size
    sums = np.zeros((2, d, d))
    squares = np.zeros((2, d, d))
    remaining = int(count)
    while remaining > 0:
        size = min(chunk, remaining)
        x = true_dist.sample(rng, size)
        gradient = model.grad_w(x, w0)
        terms = np.stack(
            [gradient[:, :, None] * gradient[:, None, :], -model.hess_w(x, w0)], axis=1
        )
        sums += terms.sum(axis=0)
        squares += (terms**2).sum(axis=0)
        remaining -= size
    mean = sums / count
    variance = squares / count - mean**2
    se = np.sqrt(np.maximum(variance, 0.0) / count)
    return (mean[0], mean[1]), (se[0], se[1])
