"""
Loss functionals of one training set and one tempered posterior.

All posterior averages of densities are formed in log space. E_X averages
use the true distribution's fixed Gauss-Legendre rule, so b_g, g_g and
D1..D3 are deterministic given the posterior.
"""

import logging
import math

import numpy as np
from django.conf import settings
from scipy.special import logsumexp

from config.exceptions import SingularEmpiricalHessian
from posterior.engine import MAX_BLOCK, empirical_matrices

from .models import DTerms, LossReport, PointwiseMoments

logger = logging.getLogger(__name__)

SINGULAR_FLOOR = 1e-12


# =============================================================================
# Pointwise posterior moments
# =============================================================================


def pointwise_moments(model, measure, x):
    """
    log E_w[p(x|w)], E_w[log p(x|w)] and Var_w[log p(x|w)] for each x.

    Two passes over blocks of posterior nodes: mean first, then squared
    deviations.
    """
    x = np.asarray(x, dtype=float)
    nodes = measure.nodes
    log_weights = measure.log_weights
    weights = measure.weights
    rows = max(1, MAX_BLOCK // max(1, x.size))

    log_sums = []
    mean = np.zeros(x.size)
    for start in range(0, nodes.shape[0], rows):
        block = slice(start, start + rows)
        log_density = model.log_density(x, nodes[block])
        log_sums.append(logsumexp(log_density + log_weights[block, None], axis=0))
        mean += weights[block] @ log_density

    variance = np.zeros(x.size)
    if measure.size > 1:
        for start in range(0, nodes.shape[0], rows):
            block = slice(start, start + rows)
            deviation = model.log_density(x, nodes[block]) - mean
            variance += weights[block] @ deviation**2

    return PointwiseMoments(
        log_mean_density=logsumexp(np.stack(log_sums), axis=0),
        mean_log_density=mean,
        var_log_density=variance,
    )


def _rule(true_dist, rule=None):
    if rule is not None:
        return rule
    return true_dist.quadrature_rule(
        panels=settings.EOS_QUADRATURE_PANELS, order=settings.EOS_QUADRATURE_ORDER
    )


def _moments(posterior, true_dist, rule=None):
    """Pointwise moments at the training points and at the E_X nodes."""
    nodes, weights = _rule(true_dist, rule)
    data = posterior.training_set.samples
    combined = pointwise_moments(
        posterior.model, posterior.measure, np.concatenate([data, nodes])
    )
    split = data.size
    return (
        combined.select(slice(None, split)),
        combined.select(slice(split, None)),
        weights,
    )


# =============================================================================
# Losses
# =============================================================================


def bayes_losses(posterior, true_dist, rule=None):
    """
    B_g = -E_X[log E_w p(X|w)], B_t = -(1/n) sum_j log E_w p(X_j|w).
    """
    training, population, weights = _moments(posterior, true_dist, rule)
    b_g = -float(weights @ population.log_mean_density)
    b_t = -float(training.log_mean_density.mean())
    return b_g, b_t


def gibbs_losses(posterior, true_dist, rule=None):
    """
    G_g = E_w[L(w)], G_t = -(1/n) sum_j E_w[log p(X_j|w)].
    """
    training, population, weights = _moments(posterior, true_dist, rule)
    g_g = -float(weights @ population.mean_log_density)
    g_t = -float(training.mean_log_density.mean())
    return g_g, g_t


def functional_variance(posterior):
    """V = sum_j Var_w[log p(X_j|w)]."""
    training = pointwise_moments(
        posterior.model, posterior.measure, posterior.training_set.samples
    )
    return float(training.var_log_density.sum())


def waic_from(n, beta, b_t, v):
    """n B_t + beta V, with no penalty at the plug-in sentinel."""
    penalty = 0.0 if math.isinf(beta) else beta * v
    return n * b_t + penalty


def waic(posterior):
    training = pointwise_moments(
        posterior.model, posterior.measure, posterior.training_set.samples
    )
    b_t = -float(training.log_mean_density.mean())
    v = float(training.var_log_density.sum())
    return waic_from(posterior.n, posterior.beta, b_t, v)


def tic_empirical(model, training_set, w_mle):
    """
    TIC_n = tr(I_n(w_mle) J_n(w_mle)^-1).

    Raises:
        SingularEmpiricalHessian
    """
    I_n, J_n, _ = empirical_matrices(model, None, training_set, math.inf, w_mle)
    smallest = float(np.linalg.eigvalsh(J_n).min())
    if smallest <= SINGULAR_FLOOR:
        raise SingularEmpiricalHessian(
            f"smallest eigenvalue of J_n is {smallest:.3e} at n={training_set.n}"
        )
    try:
        return float(np.trace(I_n @ np.linalg.inv(J_n)))
    except np.linalg.LinAlgError as exc:
        raise SingularEmpiricalHessian(str(exc)) from exc


def _d_terms_from(model, training, population, weights, data, nodes, w0):
    w0 = np.asarray(w0, dtype=float)
    # E_w f = log p(x|w0) - E_w log p(x|w); Var_w f = Var_w log p(x|w)
    mean_f_data = model.log_density(data, w0) - training.mean_log_density
    mean_f_nodes = model.log_density(nodes, w0) - population.mean_log_density
    return DTerms(
        d1=float(weights @ mean_f_nodes),
        d2=0.5 * float(weights @ (mean_f_nodes**2 + population.var_log_density)),
        d3=0.5 * float(weights @ mean_f_nodes**2),
        d4=float(mean_f_data.mean()),
        d5=0.5 * float((mean_f_data**2 + training.var_log_density).mean()),
        d6=0.5 * float((mean_f_data**2).mean()),
    )


def d_terms(posterior, true_dist, w0, rule=None):
    """
    The six D-terms of f(x, w) = log p(x|w0) - log p(x|w) for one posterior.

    E_w f^2 is assembled as (E_w f)^2 + Var_w f from the two-pass moments.
    """
    nodes, _ = _rule(true_dist, rule)
    training, population, weights = _moments(posterior, true_dist, rule)
    return _d_terms_from(
        posterior.model,
        training,
        population,
        weights,
        posterior.training_set.samples,
        nodes,
        w0,
    )


# =============================================================================
# Everything at once
# =============================================================================


def loss_report(posterior, true_dist, w0, rule=None):
    """
    LossReport and DTerms from a single pass of pointwise moments.

    Raises:
        SingularEmpiricalHessian, QuadratureFailure, BackendUnconverged
    """
    rule = _rule(true_dist, rule)
    nodes, weights = rule
    training, population, _ = _moments(posterior, true_dist, rule)
    estimators = posterior.estimators
    data = posterior.training_set

    b_t = -float(training.log_mean_density.mean())
    v = float(training.var_log_density.sum())
    report = LossReport(
        n=data.n,
        beta=posterior.beta,
        seed=data.seed,
        b_g=-float(weights @ population.log_mean_density),
        b_t=b_t,
        g_g=-float(weights @ population.mean_log_density),
        g_t=-float(training.mean_log_density.mean()),
        v=v,
        waic=waic_from(data.n, posterior.beta, b_t, v),
        tic_n=tic_empirical(posterior.model, data, estimators.w_mle),
        w_map=estimators.w_map,
        w_mle=estimators.w_mle,
    )
    terms = _d_terms_from(
        posterior.model, training, population, weights, data.samples, nodes, w0
    )
    return report, terms
