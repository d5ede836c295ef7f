"""
Model property diagnostics.

Numerical checks that a model, prior or true distribution is what it claims
to be: densities integrate to one, analytic derivatives agree with finite
differences, and samples reproduce the analytic moments.
"""

import logging
import math

import numpy as np
from scipy import integrate

from config.utils.quadrature import integrate_scalar

logger = logging.getLogger(__name__)

FD_STEP = 1e-5


def normalization_error(model, w, lower=-np.inf, upper=np.inf):
    """|integral p(x|w) dx - 1|."""
    w = np.asarray(w, dtype=float)
    total = integrate_scalar(
        lambda x: float(model.density(np.atleast_1d(x), w)[0]), lower, upper
    )
    return abs(total - 1.0)


def _relative(difference, reference):
    return float(np.max(np.abs(difference)) / max(1.0, float(np.max(np.abs(reference)))))


def gradient_error(model, x, w, step=FD_STEP):
    """
    Relative error of ``grad_w`` against centred differences of ``log_density``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    w = np.asarray(w, dtype=float)
    analytic = model.grad_w(x, w)
    numeric = np.empty_like(analytic)
    for k in range(w.size):
        shift = np.zeros_like(w)
        shift[k] = step
        numeric[:, k] = (model.log_density(x, w + shift) - model.log_density(x, w - shift)) / (
            2.0 * step
        )
    return _relative(numeric - analytic, analytic)


def hessian_error(model, x, w, step=FD_STEP):
    """
    Relative error of ``hess_w`` against centred differences of ``grad_w``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    w = np.asarray(w, dtype=float)
    analytic = model.hess_w(x, w)
    numeric = np.empty_like(analytic)
    for k in range(w.size):
        shift = np.zeros_like(w)
        shift[k] = step
        numeric[:, :, k] = (model.grad_w(x, w + shift) - model.grad_w(x, w - shift)) / (2.0 * step)
    return _relative(numeric - analytic, analytic)


def prior_normalization_error(prior):
    """|integral phi(w) dw - 1| over the prior's box."""
    value, error = integrate.nquad(
        lambda *w: math.exp(float(prior.log_density(np.array(w)))),
        [list(bounds) for bounds in prior.box],
        opts={"epsabs": 1e-10, "epsrel": 1e-10},
    )
    logger.debug("Prior mass %.12f (quadrature error %.1e)", value, error)
    return abs(value - 1.0)


def true_density_checks(true_dist, rng, count=1_000_000):
    """
    Normalisation error of q on its support, and z-scores of the sample mean
    and variance of ``count`` draws against the analytic moments.
    """
    lower, upper = true_dist.support
    mass = integrate_scalar(
        lambda x: float(true_dist.density(x)), lower, upper, points=true_dist.breakpoints
    )

    samples = true_dist.sample(rng, count)
    mean = true_dist.mean
    variance = true_dist.variance
    excess_kurtosis = float(true_dist.dist.stats(moments="k"))
    fourth_central = (excess_kurtosis + 3.0) * variance**2

    mean_se = math.sqrt(variance / count)
    variance_se = math.sqrt((fourth_central - variance**2) / count)
    return {
        "normalization_error": abs(mass - 1.0),
        "mean_z": (float(samples.mean()) - mean) / mean_se,
        "variance_z": (float(samples.var()) - variance) / variance_se,
    }
