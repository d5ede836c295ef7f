"""
Posterior backends.

Both backends turn a TemperedPosterior into a PosteriorMeasure:

- grid quadrature: a tensor trapezoid grid over MAP +/- span Laplace standard
  deviations per axis, weighted by the unnormalised posterior in log space;
- metropolis: independent random-walk chains with a Laplace-shaped
  gaussian proposal whose scale adapts during burn-in only.
"""

import logging
import math

import numpy as np
from scipy import integrate
from scipy.special import logsumexp

from config.utils.seeding import make_rng

from .engine import laplace_covariance
from .models import BackendKind, PosteriorMeasure

logger = logging.getLogger(__name__)

# Grid nodes whose log weight is this far below the maximum carry no mass.
LOG_WEIGHT_FLOOR = -70.0

ADAPTATION_BATCH = 50
ACCEPTANCE_BAND = (0.15, 0.6)

# Spawn-key namespace for chain streams; the training set uses the root stream.
CHAIN_STREAM = 1


def target_acceptance(d):
    return 0.44 if d == 1 else 0.35


def build_measure(posterior, estimators):
    if posterior.is_plugin:
        return PosteriorMeasure.point_mass(estimators.w_mle)
    if posterior.backend.kind == BackendKind.METROPOLIS:
        return metropolis_measure(posterior, estimators)
    return grid_measure(posterior, estimators)


def _laplace_cov(posterior, w):
    return laplace_covariance(
        posterior.model, posterior.prior, posterior.training_set, posterior.beta, w
    )


# =============================================================================
# Grid quadrature
# =============================================================================


def axis_rule(lower, upper, count):
    nodes = np.linspace(lower, upper, count)
    # quadrature weights are the integrals of the unit vectors
    weights = integrate.trapezoid(np.eye(count), x=nodes, axis=1)
    return nodes, weights


def grid_measure(posterior, estimators):
    """
    Normalised tensor-grid measure centred on the MAP.
    """
    spec = posterior.backend.grid
    box = posterior.model.param_box
    centre = estimators.w_map
    sd = np.sqrt(np.diag(_laplace_cov(posterior, centre)))

    axes = []
    log_axis_weights = []
    for k in range(centre.size):
        lower = max(box[k, 0], centre[k] - spec.span * sd[k])
        upper = min(box[k, 1], centre[k] + spec.span * sd[k])
        nodes, weights = axis_rule(lower, upper, spec.nodes_per_dim)
        axes.append(nodes)
        log_axis_weights.append(np.log(weights))

    nodes = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, centre.size)
    log_rule = np.stack(np.meshgrid(*log_axis_weights, indexing="ij"), axis=-1).sum(axis=-1)
    log_weights = posterior.log_unnormalized(nodes) + log_rule.reshape(-1)

    keep = log_weights > log_weights.max() + LOG_WEIGHT_FLOOR
    log_weights = log_weights[keep]
    log_weights = log_weights - logsumexp(log_weights)
    logger.debug(
        "Grid measure: %d of %d nodes kept, sd=%s", keep.sum(), keep.size, np.array2string(sd)
    )
    return PosteriorMeasure(nodes=nodes[keep], log_weights=log_weights)


# =============================================================================
# Random-walk Metropolis
# =============================================================================


def metropolis_measure(posterior, estimators):
    """
    Run ``chains`` random-walk Metropolis chains, vectorised across chains.

    Chain c draws all of its randomness from make_rng(seed, 1, c), so the
    draws do not depend on how replications are scheduled.
    """
    spec = posterior.backend.metropolis
    d = posterior.model.d
    chains, steps, burn_in = spec.chains, spec.steps, spec.burn_in
    total = burn_in + steps
    target = target_acceptance(d)

    chol = np.linalg.cholesky(_laplace_cov(posterior, estimators.w_map))
    box = posterior.model.param_box

    starts, noise, log_uniform = [], [], []
    for chain in range(chains):
        rng = make_rng(posterior.training_set.seed, CHAIN_STREAM, chain)
        starts.append(rng.standard_normal(d))
        noise.append(rng.standard_normal((total, d)))
        log_uniform.append(np.log(rng.random(total)))
    noise = np.stack(noise) @ chol.T
    log_uniform = np.stack(log_uniform)

    # overdispersed starts so R-hat can detect stuck chains
    state = np.clip(estimators.w_map + 2.0 * np.stack(starts) @ chol.T, box[:, 0], box[:, 1])
    log_target = posterior.log_unnormalized(state)
    log_scale = np.full(chains, math.log(spec.proposal_scale))

    samples = np.empty((chains, steps, d))
    batch_accepts = np.zeros(chains)
    accepts = np.zeros(chains)
    for t in range(total):
        proposal = state + np.exp(log_scale)[:, None] * noise[:, t]
        log_proposal = posterior.log_unnormalized(proposal)
        accept = log_uniform[:, t] < log_proposal - log_target
        state = np.where(accept[:, None], proposal, state)
        log_target = np.where(accept, log_proposal, log_target)

        if t < burn_in:
            batch_accepts += accept
            if (t + 1) % ADAPTATION_BATCH == 0:
                rate = batch_accepts / ADAPTATION_BATCH
                log_scale += (rate - target) / math.sqrt((t + 1) / ADAPTATION_BATCH)
                batch_accepts[:] = 0.0
        else:
            accepts += accept
            samples[:, t - burn_in] = state

    acceptance_rate = float(accepts.mean() / steps)
    flagged = not ACCEPTANCE_BAND[0] <= acceptance_rate <= ACCEPTANCE_BAND[1]
    if flagged:
        logger.warning(
            "Metropolis acceptance %.3f outside [%.2f, %.2f] (seed %d, n=%d, beta=%g)",
            acceptance_rate,
            *ACCEPTANCE_BAND,
            posterior.training_set.seed,
            posterior.n,
            posterior.beta,
        )
    return PosteriorMeasure(
        nodes=samples.reshape(chains * steps, d),
        log_weights=np.full(chains * steps, -math.log(chains * steps)),
        chains=chains,
        acceptance_rate=acceptance_rate,
        flagged=flagged,
    )
