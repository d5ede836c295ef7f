"""
Posterior Models.

Training sets, backend settings, tempered posteriors and the discrete
measures (grid nodes or metropolis draws) that posterior expectations are
taken against. All records are immutable.
"""

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from django.db import models
from django.utils.translation import gettext_lazy as _

from config.exceptions import InvalidInput
from config.utils.seeding import make_rng


class BackendKind(models.TextChoices):
    GRID = "grid_quadrature", _("Grid quadrature")
    METROPOLIS = "metropolis", _("Random-walk Metropolis")


# =============================================================================
# Training data
# =============================================================================


@dataclass(frozen=True, eq=False)
class TrainingSet:
    """
    X_1, ..., X_n drawn from the scenario's true distribution.

    The draw is a pure function of (seed, scenario, n).
    """

    samples: np.ndarray
    n: int
    seed: int
    scenario_id: str

    def __post_init__(self):
        if self.samples.shape != (self.n,):
            raise ValueError(f"expected {self.n} samples, got shape {self.samples.shape}")
        self.samples.setflags(write=False)

    @classmethod
    def generate(cls, scenario, n, seed):
        samples = scenario.true_dist.sample(make_rng(seed), int(n))
        return cls(samples=samples, n=int(n), seed=int(seed), scenario_id=scenario.id)

    @classmethod
    def from_values(cls, values, scenario_id="custom", seed=0):
        samples = np.array(values, dtype=float).reshape(-1)
        return cls(samples=samples, n=samples.size, seed=int(seed), scenario_id=scenario_id)


# =============================================================================
# Backends
# =============================================================================


@dataclass(frozen=True)
class GridSpec:
    nodes_per_dim: int = 201
    # half-width of each axis in Laplace standard deviations around the MAP
    span: float = 12.0


@dataclass(frozen=True)
class MetropolisSpec:
    chains: int = 4
    steps: int = 4000
    burn_in: int = 1000
    proposal_scale: float = 2.0


@dataclass(frozen=True)
class PosteriorBackend:
    kind: str = BackendKind.GRID
    grid: GridSpec = field(default_factory=GridSpec)
    metropolis: MetropolisSpec = field(default_factory=MetropolisSpec)


# =============================================================================
# Estimators and measures
# =============================================================================


@dataclass(frozen=True, eq=False)
class EstimatorPair:
    w_map: np.ndarray
    w_mle: np.ndarray
    L_n_at_map: float


@dataclass(frozen=True, eq=False)
class PosteriorMeasure:
    """
    A discrete approximation of the posterior: nodes w_k with normalised
    log weights. Metropolis measures are equally weighted draws stored
    chain by chain.
    """

    nodes: np.ndarray
    log_weights: np.ndarray
    chains: int = 1
    acceptance_rate: float = math.nan
    flagged: bool = False

    @property
    def size(self):
        return self.log_weights.size

    @property
    def weights(self):
        return np.exp(self.log_weights)

    @property
    def is_point_mass(self):
        return self.size == 1

    @classmethod
    def point_mass(cls, w):
        return cls(nodes=np.asarray(w, dtype=float)[None, :], log_weights=np.zeros(1))

    def per_chain(self, values):
        """Reshape node-aligned values to (chains, draws, ...)."""
        values = np.asarray(values)
        return values.reshape(self.chains, -1, *values.shape[1:])


# =============================================================================
# Tempered posterior
# =============================================================================


@dataclass(frozen=True, eq=False)
class TemperedPosterior:
    """
    p(w | X^n) proportional to phi(w) prod_i p(X_i|w)^beta.

    ``beta = math.inf`` is the plug-in sentinel: a point mass at the MLE.
    ``start`` is where the estimator searches begin (w0 when known).
    """

    model: object
    prior: object
    training_set: TrainingSet
    beta: float
    backend: PosteriorBackend = field(default_factory=PosteriorBackend)
    start: tuple = None

    def __post_init__(self):
        if not self.beta > 0:
            raise InvalidInput(f"beta must be positive, got {self.beta}")
        if self.start is not None and not self.model.contains(self.start):
            raise InvalidInput(f"start {tuple(self.start)} lies outside {self.model.id} param_box")

    @property
    def n(self):
        return self.training_set.n

    @property
    def is_plugin(self):
        return math.isinf(self.beta)

    def log_unnormalized(self, w):
        """beta * sum_i log p(X_i|w) + log phi(w) for one or a stack of w."""
        from .engine import log_unnormalized_posterior

        return log_unnormalized_posterior(self, w)

    @cached_property
    def estimators(self):
        from .engine import fit_estimators

        return fit_estimators(self, self.start)

    @cached_property
    def measure(self):
        from .backends import build_measure

        return build_measure(self, self.estimators)
