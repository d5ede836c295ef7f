"""
Functional Models.

Per-replication records: the Bayes/Gibbs losses, functional variance, WAIC
and TIC_n of one posterior (LossReport) and the six D-terms (DTerms).
Losses are in nats per sample; WAIC is a total over the n training points.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class PointwiseMoments:
    """
    Posterior summaries of log p(x|w) at a set of points x:
    log E_w[p(x|w)], E_w[log p(x|w)] and Var_w[log p(x|w)].
    """

    log_mean_density: np.ndarray
    mean_log_density: np.ndarray
    var_log_density: np.ndarray

    def select(self, index):
        return PointwiseMoments(
            log_mean_density=self.log_mean_density[index],
            mean_log_density=self.mean_log_density[index],
            var_log_density=self.var_log_density[index],
        )


@dataclass(frozen=True)
class DTerms:
    """
    D1..D3 are E_X averages and D4..D6 training averages of
    f(x, w) = log p(x|w0) - log p(x|w):
    D1 = E[E_w f], D2 = E[E_w f^2]/2, D3 = E[(E_w f)^2]/2.
    """

    d1: float
    d2: float
    d3: float
    d4: float
    d5: float
    d6: float

    def as_dict(self):
        return {f"d{k}": getattr(self, f"d{k}") for k in range(1, 7)}


@dataclass(frozen=True, eq=False)
class LossReport:
    n: int
    beta: float
    seed: int
    b_g: float
    b_t: float
    g_g: float
    g_t: float
    v: float
    waic: float
    tic_n: float
    w_map: np.ndarray
    w_mle: np.ndarray

    @property
    def waic_residual(self):
        """waic - n b_t - beta v; zero up to rounding."""
        penalty = 0.0 if np.isinf(self.beta) else self.beta * self.v
        return self.waic - self.n * self.b_t - penalty

    def jensen_holds(self, slack=1e-12):
        return self.b_t <= self.g_t + slack and self.b_g <= self.g_g + slack and self.v >= 0.0
