"""
Cached scenario geometry.

w0, I, J and the asymptotic constants depend only on the scenario, so they
are computed once per process and kept in Django's cache.
"""

import logging
from dataclasses import dataclass

import numpy as np
from django.core.cache import cache

from config.cache_utils import build_geometry_cache_key, cache_timeout

from .population import (
    POSITIVE_DEFINITE_FLOOR,
    asymptotic_constants,
    find_optimal_parameter,
    information_matrices,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScenarioGeometry:
    scenario_id: str
    optimal: object
    pair: object
    constants: object
    entropy: float

    @property
    def w0(self):
        return self.optimal.w0

    @property
    def misspecification_gap(self):
        """L(w0) - S0; zero for parametrizable scenarios."""
        return self.optimal.L_at_w0 - self.entropy

    def as_dict(self):
        return {
            "scenario": self.scenario_id,
            "w0": self.optimal.w0.tolist(),
            "L_at_w0": self.optimal.L_at_w0,
            "entropy": self.entropy,
            "I": self.pair.I.tolist(),
            "J": self.pair.J.tolist(),
            "Q": self.pair.Q.tolist(),
            **self.constants.as_dict(),
        }


def compute_geometry(scenario):
    """
    Full population geometry of a scenario.

    Raises:
        SingularInformation: J(w0) is not invertible.
        NoConvergence, MultipleMinima, QuadratureFailure
    """
    optimal = find_optimal_parameter(scenario.model, scenario.true_dist, np.asarray(scenario.init))
    pair = information_matrices(scenario.model, scenario.true_dist, optimal.w0)
    constants = asymptotic_constants(optimal, pair)
    logger.info(
        "Geometry for %s: w0=%s S=%.8f nu=%.6f mu=%.6f tic=%.6f (min eig J %.3e > %.0e)",
        scenario.id,
        np.array2string(optimal.w0, precision=8),
        constants.S,
        constants.nu,
        constants.mu,
        constants.tic,
        pair.min_eigenvalue_J(),
        POSITIVE_DEFINITE_FLOOR,
    )
    return ScenarioGeometry(
        scenario_id=scenario.id,
        optimal=optimal,
        pair=pair,
        constants=constants,
        entropy=scenario.true_dist.entropy(),
    )


def scenario_geometry(scenario, fresh=False):
    """
    Cache-first wrapper around ``compute_geometry``.
    """
    cache_key = build_geometry_cache_key(scenario.id)
    if not fresh:
        cached = cache.get(cache_key)
        if cached is not None:
            logger.debug("Cache HIT  geometry  key=%s", cache_key)
            return cached

    logger.debug("Cache MISS geometry  key=%s", cache_key)
    geometry = compute_geometry(scenario)
    cache.set(cache_key, geometry, cache_timeout())
    return geometry
