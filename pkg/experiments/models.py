"""
Experiment Models.

Replication-study configuration, aggregated results, scaling fits and the
outcome records of every verification check.
"""

import math
from dataclasses import dataclass, field

from django.db import models
from django.utils.translation import gettext_lazy as _

from posterior.models import PosteriorBackend

DEFAULT_N_GRID = (100, 400, 1600)
DEFAULT_BETA_GRID = (0.5, 1.0, 2.0, math.inf)
DEFAULT_REPLICATIONS = 10_000
DEFAULT_MASTER_SEED = 20090611
DEFAULT_SE_MULTIPLIER = 3.0


@dataclass(frozen=True)
class ExperimentConfig:
    scenario_id: str
    n_grid: tuple = DEFAULT_N_GRID
    beta_grid: tuple = DEFAULT_BETA_GRID
    replications: int = DEFAULT_REPLICATIONS
    master_seed: int = DEFAULT_MASTER_SEED
    backend: PosteriorBackend = field(default_factory=PosteriorBackend)
    tolerance_se_multiplier: float = DEFAULT_SE_MULTIPLIER

    @property
    def finite_betas(self):
        return tuple(beta for beta in self.beta_grid if not math.isinf(beta))

    @property
    def cells(self):
        return [(n, beta) for n in self.n_grid for beta in self.beta_grid]

    @property
    def total_rows(self):
        return len(self.n_grid) * len(self.beta_grid) * self.replications


# =============================================================================
# Check outcomes
# =============================================================================


class CheckStatus(models.TextChoices):
    PASS = "pass", _("Pass")
    FAIL = "fail", _("Fail")
    INSUFFICIENT_PRECISION = "insufficient_precision", _("Insufficient precision")


@dataclass(frozen=True)
class CheckResult:
    """
    One hypothesis test: ``observed`` against ``predicted`` within
    ``multiplier`` standard errors (or a documented slope band).
    """

    name: str
    observed: float
    predicted: float
    se: float
    multiplier: float
    status: str
    detail: str = ""

    @property
    def passed(self):
        return self.status == CheckStatus.PASS

    @property
    def is_hard_failure(self):
        return self.status == CheckStatus.FAIL

    def as_dict(self):
        return {
            "name": self.name,
            "observed": self.observed,
            "predicted": self.predicted,
            "se": self.se,
            "multiplier": self.multiplier,
            "status": str(self.status),
            "pass": self.passed,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class ScalingFit:
    """Ordinary least squares of log RMS on log n."""

    quantity: str
    log_n: tuple
    log_rms: tuple
    slope: float
    slope_se: float
    intercept: float


# =============================================================================
# Aggregates
# =============================================================================


@dataclass(frozen=True)
class AggregateCell:
    """
    Means and standard errors (sample SD / sqrt(count)) over the finite rows
    of one (n, beta) cell.
    """

    n: int
    beta: float
    count: int
    failed: int
    means: dict
    ses: dict

    def mean(self, name):
        return self.means[name]

    def se(self, name):
        return self.ses[name]

    def as_dict(self):
        return {
            "n": self.n,
            "beta": self.beta,
            "count": self.count,
            "failed": self.failed,
            "means": self.means,
            "ses": self.ses,
        }


@dataclass(frozen=True)
class AggregateReport:
    scenario_id: str
    cells: dict

    @property
    def ns(self):
        return sorted({n for n, _ in self.cells})

    @property
    def betas(self):
        return sorted({beta for _, beta in self.cells})

    def cell(self, n, beta):
        return self.cells[(n, beta)]
