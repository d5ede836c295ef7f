"""
Scenario Models.

Parametric models p(x|w), priors phi(w) and true densities q(x) used by
every experiment. These are immutable in-memory records (no database
tables); enumerations use Django's TextChoices as elsewhere in the project.

Array conventions:
    x  -- 1-D array of data points, shape (m,)
    w  -- parameter vector, shape (d,), or a stack of nodes, shape (K, d)
    log_density(x, w) -> (m,) for a single w, (K, m) for a stack
    grad_w(x, w)      -> (m, d)
    hess_w(x, w)      -> (m, d, d)
"""

import math
from abc import ABC, abstractmethod
from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np
from django.db import models
from django.utils.translation import gettext_lazy as _
from scipy import stats

from config.exceptions import UnknownScenario
from config.utils.quadrature import composite_gauss_legendre, integrate_scalar

LOG_2PI = math.log(2.0 * math.pi)
DEFAULT_BOX = (-20.0, 20.0)


class ScenarioTag(models.TextChoices):
    """Scenario classification tags."""

    PARAMETRIZABLE_REGULAR = "parametrizable_regular", _("Parametrizable, regular")
    NONPARAMETRIZABLE_REGULAR = "nonparametrizable_regular", _("Nonparametrizable, regular")


# =============================================================================
# Parametric models
# =============================================================================


class ParametricModel(ABC):
    """
    A learning machine p(x|w) with analytic derivatives in w.

    Subclasses are frozen dataclasses providing ``id``, ``d`` and ``box``
    (per-coordinate finite bounds used for search and quadrature).
    """

    id: str
    d: int
    box: tuple

    @property
    def param_box(self):
        return np.array(self.box, dtype=float)

    @abstractmethod
    def log_density(self, x, w):
        """log p(x|w)."""

    @abstractmethod
    def grad_w(self, x, w):
        """Gradient of log p(x|w) in w, one row per data point."""

    @abstractmethod
    def hess_w(self, x, w):
        """Hessian of log p(x|w) in w, one matrix per data point."""

    def density(self, x, w):
        return np.exp(self.log_density(x, w))

    def contains(self, w):
        box = self.param_box
        w = np.asarray(w, dtype=float)
        return bool(np.all(w >= box[:, 0]) and np.all(w <= box[:, 1]))


@dataclass(frozen=True)
class GaussianLocation(ParametricModel):
    """
    N(w, 1): the gaussian location family, d = 1.
    """

    id: str = "gauss-loc"
    d: int = 1
    box: tuple = (DEFAULT_BOX,)

    def log_density(self, x, w):
        x = np.asarray(x, dtype=float)
        loc = np.asarray(w, dtype=float)[..., 0:1]
        return -0.5 * LOG_2PI - 0.5 * (x - loc) ** 2

    def grad_w(self, x, w):
        x = np.asarray(x, dtype=float)
        return (x - float(w[0]))[:, None]

    def hess_w(self, x, w):
        x = np.asarray(x, dtype=float)
        return np.full((x.size, 1, 1), -1.0)


@dataclass(frozen=True)
class GaussianLocationScale(ParametricModel):
    """
    N(w1, exp(w2)^2): location and log-scale, d = 2.
    """

    id: str = "gauss-loc-scale"
    d: int = 2
    box: tuple = (DEFAULT_BOX, DEFAULT_BOX)

    def log_density(self, x, w):
        x = np.asarray(x, dtype=float)
        w = np.asarray(w, dtype=float)
        loc = w[..., 0:1]
        log_scale = w[..., 1:2]
        return -0.5 * LOG_2PI - log_scale - 0.5 * (x - loc) ** 2 * np.exp(-2.0 * log_scale)

    def grad_w(self, x, w):
        x = np.asarray(x, dtype=float)
        residual = x - w[0]
        precision = math.exp(-2.0 * w[1])
        return np.column_stack([residual * precision, residual**2 * precision - 1.0])

    def hess_w(self, x, w):
        x = np.asarray(x, dtype=float)
        residual = x - w[0]
        precision = math.exp(-2.0 * w[1])
        hessian = np.empty((x.size, 2, 2))
        hessian[:, 0, 0] = -precision
        hessian[:, 0, 1] = hessian[:, 1, 0] = -2.0 * residual * precision
        hessian[:, 1, 1] = -2.0 * residual**2 * precision
        return hessian


# =============================================================================
# True distributions
# =============================================================================


@dataclass(frozen=True)
class TrueDistribution:
    """
    A true density q(x) backed by a frozen ``scipy.stats`` distribution.

    ``support`` is the finite interval every E_X integral runs over;
    ``breakpoints`` are kinks of q (e.g. the Laplace mode) where quadrature
    panels must split.
    """

    id: str
    dist: object
    support: tuple
    breakpoints: tuple = ()

    def density(self, x):
        return self.dist.pdf(x)

    def log_density(self, x):
        return self.dist.logpdf(x)

    def sample(self, rng, count):
        return np.asarray(self.dist.rvs(size=count, random_state=rng), dtype=float)

    @property
    def mean(self):
        return float(self.dist.mean())

    @property
    def variance(self):
        return float(self.dist.var())

    @property
    def analytic_moments(self):
        return {"mean": self.mean, "variance": self.variance}

    def expectation(self, fn):
        """E_X[fn(X)] for a scalar function, by adaptive quadrature."""
        lower, upper = self.support
        return integrate_scalar(
            lambda x: fn(x) * self.density(x), lower, upper, points=self.breakpoints
        )

    def entropy(self):
        """S0 = -E_X[log q(X)]."""
        return -self.expectation(lambda x: float(self.log_density(x)))

    def quadrature_rule(self, panels=24, order=20):
        """
        Nodes x_q and weights omega_q with sum_q omega_q g(x_q) ~ E_X[g(X)].
        """
        lower, upper = self.support
        nodes, weights = composite_gauss_legendre(
            lower, upper, points=self.breakpoints, panels=panels, order=order
        )
        return nodes, weights * self.density(nodes)


def gaussian_truth(truth_id, variance, mean=0.0, width=20.0):
    sd = math.sqrt(variance)
    return TrueDistribution(
        id=truth_id,
        dist=stats.norm(loc=mean, scale=sd),
        support=(mean - width * sd, mean + width * sd),
    )


def laplace_truth(truth_id, scale=1.0, mean=0.0, width=40.0):
    return TrueDistribution(
        id=truth_id,
        dist=stats.laplace(loc=mean, scale=scale),
        support=(mean - width * scale, mean + width * scale),
        breakpoints=(mean,),
    )


# =============================================================================
# Priors
# =============================================================================


@dataclass(frozen=True)
class GaussianPrior:
    """
    Independent N(mean, scale^2) coordinates truncated to the parameter box.
    """

    box: tuple
    mean: float = 0.0
    scale: float = 10.0
    proper: bool = True

    @property
    def d(self):
        return len(self.box)

    def _coordinates(self):
        return [
            stats.truncnorm(
                (lo - self.mean) / self.scale,
                (hi - self.mean) / self.scale,
                loc=self.mean,
                scale=self.scale,
            )
            for lo, hi in self.box
        ]

    def log_density(self, w):
        """log phi(w); -inf outside the box. Accepts (d,) or (K, d)."""
        w = np.asarray(w, dtype=float)
        total = 0.0
        for k, coordinate in enumerate(self._coordinates()):
            total = total + coordinate.logpdf(w[..., k])
        return total

    def grad_log_density(self, w):
        return -(np.asarray(w, dtype=float) - self.mean) / self.scale**2

    def hess_log_density(self, w):
        return -np.eye(self.d) / self.scale**2


# =============================================================================
# Scenarios
# =============================================================================


@dataclass(frozen=True)
class Scenario:
    """A (model, true distribution, prior) triple with its classification tag."""

    id: str
    label: str
    model: ParametricModel
    true_dist: TrueDistribution
    prior: GaussianPrior
    tag: str
    init: tuple

    @property
    def d(self):
        return self.model.d


class ScenarioCatalog(Mapping):
    """
    Read-only mapping of scenario id -> Scenario, in registration order.
    """

    def __init__(self, scenarios):
        self._scenarios = {scenario.id: scenario for scenario in scenarios}

    def __getitem__(self, scenario_id):
        try:
            return self._scenarios[scenario_id]
        except KeyError:
            raise UnknownScenario(
                f"unknown scenario {scenario_id!r}; available: {', '.join(self._scenarios)}"
            ) from None

    def __iter__(self):
        return iter(self._scenarios)

    def __len__(self):
        return len(self._scenarios)
