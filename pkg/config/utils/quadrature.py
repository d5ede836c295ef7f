"""
Quadrature helpers.

Two flavours are used across the laboratory:

- adaptive ``scipy.integrate.quad`` / ``quad_vec`` for population
  quantities (L(w), its derivatives, I and J), with the error estimate
  checked against a hard bound;
- a fixed composite Gauss-Legendre rule for the per-replication E_X
  integrals, which must be vectorised over thousands of posterior nodes.
"""

import logging
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from config.exceptions import QuadratureFailure

logger = logging.getLogger(__name__)

# Any adaptive integral whose error estimate exceeds this raises. The bound
# is absolute for integrals of order one and scales with larger magnitudes.
MAX_ERROR_BOUND = 1e-6


def _error_too_large(value, error):
    return error > MAX_ERROR_BOUND * max(1.0, float(np.max(np.abs(value))))


def integrate_scalar(fn, lower, upper, points=(), epsabs=1e-10, epsrel=1e-10, limit=500):
    """
    Integrate a scalar function over [lower, upper] with QUADPACK.

    Raises:
        QuadratureFailure: the reported error bound exceeds MAX_ERROR_BOUND.
    """
    inner = [p for p in points if lower < p < upper]
    value, error = integrate.quad(
        fn,
        lower,
        upper,
        points=inner or None,
        epsabs=epsabs,
        epsrel=epsrel,
        limit=limit,
    )
    if not np.isfinite(value) or _error_too_large(value, error):
        raise QuadratureFailure(
            f"integral over [{lower:g}, {upper:g}] has error bound {error:.3e}"
        )
    return value


def integrate_vector(fn, lower, upper, points=(), epsabs=1e-11, epsrel=1e-11, limit=2000):
    """
    Integrate an array-valued function over [lower, upper] (``quad_vec``).

    Raises:
        QuadratureFailure: the reported error bound exceeds MAX_ERROR_BOUND.
    """
    inner = [p for p in points if lower < p < upper]
    value, error = integrate.quad_vec(
        fn,
        lower,
        upper,
        points=inner or None,
        epsabs=epsabs,
        epsrel=epsrel,
        limit=limit,
    )
    value = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(value)) or _error_too_large(value, error):
        raise QuadratureFailure(
            f"vector integral over [{lower:g}, {upper:g}] has error bound {error:.3e}"
        )
    return value


@lru_cache(maxsize=64)
def _composite_rule(breakpoints, panels, order):
    unit_nodes, unit_weights = special.roots_legendre(order)
    nodes = []
    weights = []
    for left, right in zip(breakpoints[:-1], breakpoints[1:]):
        edges = np.linspace(left, right, panels + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            half = 0.5 * (b - a)
            nodes.append(0.5 * (a + b) + half * unit_nodes)
            weights.append(half * unit_weights)
    nodes = np.concatenate(nodes)
    weights = np.concatenate(weights)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def composite_gauss_legendre(lower, upper, points=(), panels=24, order=20):
    """
    Composite Gauss-Legendre nodes and weights on [lower, upper].

    Each segment between consecutive breakpoints (kinks of the integrand)
    is split into ``panels`` equal panels carrying an ``order``-point rule.
    Returned arrays are read-only and shared between callers.
    """
    inner = sorted(p for p in points if lower < p < upper)
    breakpoints = tuple(float(p) for p in [lower, *inner, upper])
    return _composite_rule(breakpoints, int(panels), int(order))
