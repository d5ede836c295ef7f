"""
Posterior engine.

Empirical loss L_n, the MAP and ML estimators, the empirical matrices
I_n, J_n, K_n and posterior expectations E_w[g].
"""

import logging
import math

import arviz as az
import numpy as np

from config.exceptions import BackendUnconverged, InvalidInput
from config.utils.optimization import newton_minimize

from .models import BackendKind, EstimatorPair

logger = logging.getLogger(__name__)

# Chunk size (nodes x data points) for vectorised log-likelihood sums.
MAX_BLOCK = 4_000_000

RHAT_THRESHOLD = 1.05


def _prior_weight(beta, n):
    """1/(n beta), zero for the plug-in sentinel."""
    return 0.0 if math.isinf(beta) else 1.0 / (n * beta)


# =============================================================================
# Empirical loss
# =============================================================================


def empirical_loss(model, prior, training_set, beta, w):
    """
    L_n(w) = -(1/n) sum_j log p(X_j|w) - (1/(n beta)) log phi(w).
    """
    w = np.asarray(w, dtype=float)
    loss = -float(np.mean(model.log_density(training_set.samples, w)))
    weight = _prior_weight(beta, training_set.n)
    if weight:
        loss -= weight * float(prior.log_density(w))
    return loss


def empirical_gradient(model, prior, training_set, beta, w):
    w = np.asarray(w, dtype=float)
    gradient = -model.grad_w(training_set.samples, w).mean(axis=0)
    weight = _prior_weight(beta, training_set.n)
    if weight:
        gradient = gradient - weight * prior.grad_log_density(w)
    return gradient


def empirical_matrices(model, prior, training_set, beta, w):
    """
    I_n(w), J_n(w) and K_n(w) = J_n(w) - (1/(n beta)) hess log phi(w).
    """
    w = np.asarray(w, dtype=float)
    gradient = model.grad_w(training_set.samples, w)
    I_n = gradient.T @ gradient / training_set.n
    J_n = -model.hess_w(training_set.samples, w).mean(axis=0)
    K_n = J_n.copy()
    weight = _prior_weight(beta, training_set.n)
    if weight:
        K_n = K_n - weight * prior.hess_log_density(w)
    return I_n, J_n, K_n


def laplace_covariance(model, prior, training_set, beta, w):
    """K_n(w)^-1 / (n beta); zero at the plug-in sentinel."""
    d = np.asarray(w).size
    if math.isinf(beta):
        return np.zeros((d, d))
    K_n = empirical_matrices(model, prior, training_set, beta, w)[2]
    return np.linalg.inv(K_n) / (training_set.n * beta)


def log_unnormalized_posterior(posterior, w):
    """
    beta * sum_i log p(X_i|w) + log phi(w) for w of shape (d,) or (K, d).
    """
    w = np.asarray(w, dtype=float)
    stack = np.atleast_2d(w)
    samples = posterior.training_set.samples
    rows = max(1, MAX_BLOCK // samples.size)
    log_likelihood = np.empty(stack.shape[0])
    for start in range(0, stack.shape[0], rows):
        block = stack[start : start + rows]
        log_likelihood[start : start + rows] = posterior.model.log_density(samples, block).sum(
            axis=1
        )
    values = posterior.beta * log_likelihood + posterior.prior.log_density(stack)
    return values if w.ndim == 2 else float(values[0])


# =============================================================================
# Estimators
# =============================================================================


def fit_estimators(posterior, start=None):
    """
    MAP (minimiser of L_n at beta) and MLE (minimiser at beta = infinity).

    Raises:
        InvalidInput: fewer than d + 1 data points.
        NoConvergence
    """
    model, prior, data = posterior.model, posterior.prior, posterior.training_set
    if data.n < model.d + 1:
        raise InvalidInput(f"n={data.n} is below d + 1 = {model.d + 1}")

    box = model.param_box
    x0 = box.mean(axis=1) if start is None else np.asarray(start, dtype=float)

    def solve(beta):
        return newton_minimize(
            lambda w: empirical_loss(model, prior, data, beta, w),
            lambda w: empirical_gradient(model, prior, data, beta, w),
            lambda w: empirical_matrices(model, prior, data, beta, w)[2],
            x0,
            bounds=box,
        )

    mle = solve(math.inf)
    if posterior.is_plugin:
        return EstimatorPair(w_map=mle.x, w_mle=mle.x, L_n_at_map=mle.value)
    posterior_mode = solve(posterior.beta)
    return EstimatorPair(w_map=posterior_mode.x, w_mle=mle.x, L_n_at_map=posterior_mode.value)


# =============================================================================
# Posterior expectations
# =============================================================================


def gelman_rubin(chain_values):
    """
    Potential scale reduction R-hat for values of shape (chains, draws, ...),
    computed by ``arviz.rhat`` without chain splitting.

    Values that are one constant across every chain give R-hat = 1; chains
    stuck at different constants give inf.
    """
    chain_values = np.asarray(chain_values, dtype=float)
    dataset = az.convert_to_dataset({"g": chain_values})
    with np.errstate(divide="ignore", invalid="ignore"):
        rhat = np.asarray(az.rhat(dataset, method="identity")["g"].values, dtype=float)
    constant = np.all(chain_values == chain_values[:1, :1], axis=(0, 1))
    return np.where(constant, 1.0, np.nan_to_num(rhat, nan=np.inf))


def expectation(measure, values):
    """Weighted average of node-aligned values (shape (K, ...))."""
    values = np.asarray(values, dtype=float)
    return np.tensordot(measure.weights, values, axes=1)


def posterior_expectation(posterior, g, measure=None):
    """
    E_w[g(w)] under the tempered posterior.

    ``g`` is vectorised: it maps a (K, d) stack of parameters to an array
    whose leading axis has length K.

    Raises:
        BackendUnconverged: metropolis chains disagree on g (R-hat > 1.05).
    """
    measure = posterior.measure if measure is None else measure
    values = np.asarray(g(measure.nodes), dtype=float)
    if values.ndim == 0:
        values = np.full(measure.size, float(values))

    if posterior.backend.kind == BackendKind.METROPOLIS and not posterior.is_plugin:
        rhat = float(np.max(gelman_rubin(measure.per_chain(values))))
        if rhat > RHAT_THRESHOLD:
            raise BackendUnconverged(f"R-hat {rhat:.4f} exceeds {RHAT_THRESHOLD}")
    return expectation(measure, values)


def batch_standard_error(measure, values, per_chain=5):
    """
    Monte Carlo standard error of an equally weighted average by batch means.
    """
    values = np.asarray(values, dtype=float)
    batches = np.array_split(values, measure.chains * per_chain, axis=0)
    means = np.stack([batch.mean(axis=0) for batch in batches])
    return means.std(axis=0, ddof=1) / math.sqrt(len(batches))


def posterior_moments(posterior, w0):
    """
    Posterior spread around the MAP (w_hat) and around w0.

    Returns a dict with E_w[w - w_hat], E_w[(w - w_hat)(w - w_hat)^T],
    E_w[|w - w_hat|^3], E_w[(w - w0)(w - w0)^T], E_w[|w - w0|^3], the Laplace
    covariance K_n(w_hat)^-1 / (n beta) and the metropolis acceptance rate.
    """
    estimators = posterior.estimators
    w_hat = estimators.w_map
    w0 = np.asarray(w0, dtype=float)

    def centred(centre):
        def offsets(nodes):
            return nodes - centre

        def outer(nodes):
            delta = nodes - centre
            return delta[:, :, None] * delta[:, None, :]

        def cubed(nodes):
            return np.linalg.norm(nodes - centre, axis=1) ** 3

        return offsets, outer, cubed

    offsets, outer, cubed = centred(w_hat)
    _, outer0, cubed0 = centred(w0)
    return {
        "mean_offset": posterior_expectation(posterior, offsets),
        "second_moment": posterior_expectation(posterior, outer),
        "third_abs_moment": float(posterior_expectation(posterior, cubed)),
        "w0_second_moment": posterior_expectation(posterior, outer0),
        "w0_third_abs_moment": float(posterior_expectation(posterior, cubed0)),
        "laplace_cov": laplace_covariance(
            posterior.model, posterior.prior, posterior.training_set, posterior.beta, w_hat
        ),
        "acceptance_rate": posterior.measure.acceptance_rate,
    }
