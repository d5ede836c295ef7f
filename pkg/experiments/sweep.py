"""
Bayes against maximum likelihood: E[B_g] as a function of 1/beta.

E[B_g](beta) = S + tr(IJ^-1)/(2n) + (d - tr(IJ^-1))/(2n beta), so relative
to the plug-in (beta = infinity) the tempered posterior gains or loses
(d - tr(IJ^-1))/(2n beta), depending on the sign of d - tr(IJ^-1).
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from config.exceptions import InvalidInput
from geometry.services import scenario_geometry
from scenarios.catalog import get_scenario

from .aggregation import aggregate as aggregate_rows
from .models import CheckResult, CheckStatus
from .replication import run_replications
from .verification import beta_label, expansion_check

logger = logging.getLogger(__name__)

FLAT_TOLERANCE = 1e-9
SWEEP_FIELDS = ["n", "beta", "inv_beta", "mean_b_g", "se_b_g", "predicted_b_g", "gap", "predicted_gap"]


@dataclass(frozen=True)
class SweepPoint:
    n: int
    beta: float
    inv_beta: float
    mean_b_g: float
    se_b_g: float
    predicted_b_g: float
    gap: float
    predicted_gap: float

    def as_dict(self):
        return {name: getattr(self, name) for name in SWEEP_FIELDS}


def predicted_b_g(constants, n, beta):
    inverse = 0.0 if math.isinf(beta) else 1.0 / beta
    d, tic = constants.d, constants.tic
    return constants.S + tic / (2 * n) + (d - tic) * inverse / (2 * n)


def _check_grid(betas):
    finite = [beta for beta in betas if not math.isinf(beta)]
    if not any(math.isinf(beta) for beta in betas):
        raise InvalidInput("beta sweep needs beta = inf in beta_grid")
    if len(finite) < 3:
        raise InvalidInput(f"beta sweep needs at least 3 finite betas, got {len(finite)}")
    return finite


def sweep_table(aggregate, constants):
    """One SweepPoint per (n, beta) cell, ordered by n then 1/beta."""
    points = []
    for n in aggregate.ns:
        plugin = aggregate.cell(n, math.inf)
        for beta in sorted(aggregate.betas, key=lambda value: 0.0 if math.isinf(value) else 1 / value):
            cell = aggregate.cell(n, beta)
            points.append(
                SweepPoint(
                    n=n,
                    beta=beta,
                    inv_beta=0.0 if math.isinf(beta) else 1.0 / beta,
                    mean_b_g=cell.mean("b_g"),
                    se_b_g=cell.se("b_g"),
                    predicted_b_g=predicted_b_g(constants, n, beta),
                    gap=cell.mean("b_g") - plugin.mean("b_g"),
                    predicted_gap=predicted_b_g(constants, n, beta) - predicted_b_g(constants, n, math.inf),
                )
            )
    return points


def beta_sweep_checks(aggregate, constants, multiplier=3.0):
    """
    At the largest n: E[B_g](beta) - E[B_g](inf) against (d - tr)/(2n beta)
    per finite beta, and the direction of E[B_g] in 1/beta. Returns no
    checks when the grid cannot support a sweep.
    """
    try:
        finite = _check_grid(aggregate.betas)
    except InvalidInput:
        return []

    n = aggregate.ns[-1]
    gap_scale = constants.tic / (2 * n)
    plugin = aggregate.cell(n, math.inf)
    results = []
    for beta in finite:
        cell = aggregate.cell(n, beta)
        predicted = predicted_b_g(constants, n, beta) - predicted_b_g(constants, n, math.inf)
        results.append(
            expansion_check(
                f"sweep.bayes_vs_mle[beta={beta_label(beta)}]",
                cell.mean("b_g") - plugin.mean("b_g"),
                predicted,
                math.hypot(cell.se("b_g"), plugin.se("b_g")),
                multiplier,
                scale=max(abs(predicted), gap_scale),
            )
        )

    betas = [math.inf] + finite
    inverse = np.array([0.0 if math.isinf(beta) else 1.0 / beta for beta in betas])
    means = np.array([aggregate.cell(n, beta).mean("b_g") for beta in betas])
    fit = stats.linregress(inverse, means)
    expected = (constants.d - constants.tic) / (2 * n)
    if abs(constants.d - constants.tic) <= FLAT_TOLERANCE:
        ok = abs(fit.slope) <= multiplier * fit.stderr
        detail = "flat in 1/beta within SE (d = tr(IJ^-1))"
    else:
        ok = np.sign(fit.slope) == np.sign(expected)
        trend = "decreasing" if expected < 0 else "increasing"
        detail = f"{trend} in 1/beta (sign of d - tr(IJ^-1))"
    results.append(
        CheckResult(
            name="sweep.direction",
            observed=float(fit.slope),
            predicted=float(expected),
            se=float(fit.stderr),
            multiplier=float(multiplier),
            status=CheckStatus.PASS if ok else CheckStatus.FAIL,
            detail=detail,
        )
    )
    return results


def beta_sweep(config, rows=None, geometry=None, workers=None):
    """
    Run (or reuse) a study over ``config.beta_grid`` and tabulate E[B_g]
    against 1/beta.

    Returns:
        (points, checks)

    Raises:
        InvalidInput: the grid lacks beta = inf or has fewer than three
            finite betas.
    """
    _check_grid(config.beta_grid)
    if geometry is None:
        geometry = scenario_geometry(get_scenario(config.scenario_id))
    if rows is None:
        rows = run_replications(config, geometry.w0, workers=workers)
    report = aggregate_rows(rows, geometry.constants.S, config.scenario_id, geometry.constants.d)
    points = sweep_table(report, geometry.constants)
    checks = beta_sweep_checks(report, geometry.constants, config.tolerance_se_multiplier)
    logger.info(
        "Beta sweep %s: %d points, %d checks failed",
        config.scenario_id,
        len(points),
        sum(check.is_hard_failure for check in checks),
    )
    return points, checks
