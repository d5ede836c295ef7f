"""
Built-in scenario catalog and scenario classification.
"""

import logging
from functools import lru_cache

import numpy as np

from config.exceptions import SingularScenario
from geometry.population import (
    POSITIVE_DEFINITE_FLOOR,
    find_optimal_parameter,
    information_matrices,
)

from .models import (
    GaussianLocation,
    GaussianLocationScale,
    GaussianPrior,
    Scenario,
    ScenarioCatalog,
    ScenarioTag,
    gaussian_truth,
    laplace_truth,
)

logger = logging.getLogger(__name__)

GAUSS_MATCH = "gauss-match"
GAUSS_WIDE = "gauss-wide"
GAUSS_NARROW = "gauss-narrow"
GAUSS_SCALE_LAPLACE = "gaussscale-laplace"


@lru_cache(maxsize=1)
def builtin_scenarios():
    """
    The four built-in scenarios, each with a N(0, 10^2) prior per coordinate
    truncated to the parameter box.
    """
    location = GaussianLocation()
    location_scale = GaussianLocationScale()
    return ScenarioCatalog(
        [
            Scenario(
                id=GAUSS_MATCH,
                label="N(w, 1) against N(0, 1)",
                model=location,
                true_dist=gaussian_truth("normal-var1", 1.0),
                prior=GaussianPrior(box=location.box),
                tag=ScenarioTag.PARAMETRIZABLE_REGULAR,
                init=(0.0,),
            ),
            Scenario(
                id=GAUSS_WIDE,
                label="N(w, 1) against N(0, 2)",
                model=location,
                true_dist=gaussian_truth("normal-var2", 2.0),
                prior=GaussianPrior(box=location.box),
                tag=ScenarioTag.NONPARAMETRIZABLE_REGULAR,
                init=(0.0,),
            ),
            Scenario(
                id=GAUSS_NARROW,
                label="N(w, 1) against N(0, 0.5)",
                model=location,
                true_dist=gaussian_truth("normal-var0.5", 0.5),
                prior=GaussianPrior(box=location.box),
                tag=ScenarioTag.NONPARAMETRIZABLE_REGULAR,
                init=(0.0,),
            ),
            Scenario(
                id=GAUSS_SCALE_LAPLACE,
                label="N(w1, exp(w2)^2) against Laplace(0, 1)",
                model=location_scale,
                true_dist=laplace_truth("laplace-scale1", 1.0),
                prior=GaussianPrior(box=location_scale.box),
                tag=ScenarioTag.NONPARAMETRIZABLE_REGULAR,
                init=(1.0, 1.0),
            ),
        ]
    )


def get_scenario(scenario_id):
    """
    Raises:
        UnknownScenario
    """
    return builtin_scenarios()[scenario_id]


def classify_scenario(model, true_dist, tol=1e-6, init=None):
    """
    Tag a (model, true distribution) pair from its population geometry.

    The prior plays no part: the tag depends on L(w0) - S0 and J(w0) only.

    Raises:
        SingularScenario: smallest eigenvalue of J(w0) is at or below 1e-8.
    """
    optimal = find_optimal_parameter(
        model, true_dist, None if init is None else np.asarray(init, dtype=float)
    )
    pair = information_matrices(model, true_dist, optimal.w0)
    smallest = pair.min_eigenvalue_J()
    if smallest <= POSITIVE_DEFINITE_FLOOR:
        raise SingularScenario(
            f"{model.id} against {true_dist.id}: smallest eigenvalue of J(w0) is {smallest:.3e}"
        )

    gap = optimal.L_at_w0 - true_dist.entropy()
    tag = (
        ScenarioTag.NONPARAMETRIZABLE_REGULAR if gap > tol else ScenarioTag.PARAMETRIZABLE_REGULAR
    )
    logger.debug("%s against %s: gap %.3e -> %s", model.id, true_dist.id, gap, tag)
    return tag
