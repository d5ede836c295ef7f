"""
Verification suites.

Each check is a hypothesis test reported as a CheckResult:

- expansion checks compare a replication mean with its predicted value
  within ``multiplier`` standard errors, after an error-budget guard
  (SE must be below a third of the predicted 1/n scale, else the check is
  reported as insufficient_precision rather than failing);
- scaling checks fit log RMS against log n by least squares and compare
  the slope with a band;
- identity checks hold on every row to 1e-10.
"""

import logging
import math

import numpy as np
from scipy import stats

from config.exceptions import InsufficientPoints, InvalidInput
from functionals.schema import unflatten_matrix, unflatten_vector

from .aggregation import rows_for
from .models import CheckResult, CheckStatus, ScalingFit

logger = logging.getLogger(__name__)

IDENTITY_TOLERANCE = 1e-10
# o(1/n) residuals: log-log slope of |residual| below -1 + 0.3
DECAY_SLOPE_BOUND = -1.0 + 0.3
# o(1) residuals
VANISHING_SLOPE_BOUND = -0.3
HALF_RATE_BAND = 0.15
UNIT_RATE_BAND = 0.2
SPREAD_SLOPE_BAND = 0.2
COVARIANCE_REL_TOLERANCE = 0.05
# relative gap between E_w[(w - w_hat)(w - w_hat)^T] and K_n^-1/(n beta), times n
LAPLACE_GAP_CONSTANT = 20.0
VANISHING = 1e-10


def beta_label(beta):
    return "inf" if math.isinf(beta) else f"{beta:g}"


# =============================================================================
# Check builders
# =============================================================================


def expansion_check(name, observed, predicted, se, multiplier, scale=None, detail=""):
    """
    Pass iff |observed - predicted| <= multiplier * se; insufficient_precision
    when se is missing or not below ``scale`` / 3.
    """
    if not np.isfinite(se) or (scale is not None and not se < abs(scale) / 3.0):
        status = CheckStatus.INSUFFICIENT_PRECISION
    elif abs(observed - predicted) <= multiplier * se:
        status = CheckStatus.PASS
    else:
        status = CheckStatus.FAIL
    return CheckResult(
        name=name,
        observed=float(observed),
        predicted=float(predicted),
        se=float(se),
        multiplier=float(multiplier),
        status=status,
        detail=detail,
    )


def band_check(name, observed, predicted, tolerance, se=math.nan, detail=""):
    """Pass iff |observed - predicted| <= tolerance."""
    status = CheckStatus.PASS if abs(observed - predicted) <= tolerance else CheckStatus.FAIL
    return CheckResult(
        name=name,
        observed=float(observed),
        predicted=float(predicted),
        se=float(se),
        multiplier=float(tolerance),
        status=status,
        detail=detail,
    )


def fit_scaling(quantity, ns, values):
    """
    Least-squares slope of log(values) on log(n).

    Raises:
        InsufficientPoints: fewer than three sample sizes.
    """
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    if ns.size < 3:
        raise InsufficientPoints(f"{quantity}: {ns.size} sample sizes, need at least 3")
    log_n = np.log(ns)
    log_values = np.log(values)
    fit = stats.linregress(log_n, log_values)
    return ScalingFit(
        quantity=quantity,
        log_n=tuple(log_n.tolist()),
        log_rms=tuple(log_values.tolist()),
        slope=float(fit.slope),
        slope_se=float(fit.stderr),
        intercept=float(fit.intercept),
    )


def slope_check(name, fit, predicted, tolerance):
    return band_check(
        name,
        fit.slope,
        predicted,
        tolerance,
        se=fit.slope_se,
        detail=f"log-log slope of {fit.quantity}",
    )


def decay_check(name, ns, residuals, ses, multiplier, bound=DECAY_SLOPE_BOUND):
    """
    |residual| must shrink with log-log slope below ``bound``. Residuals
    that are within ``multiplier`` SE of zero at every n pass outright.
    """
    residuals = np.abs(np.asarray(residuals, dtype=float))
    ses = np.asarray(ses, dtype=float)
    consistent = bool(np.all(residuals <= multiplier * ses))
    slope = math.nan
    if np.all(residuals > 0):
        slope = fit_scaling(name, ns, residuals).slope
    if consistent:
        status = CheckStatus.PASS
        detail = "residual consistent with zero at every n"
    elif slope < bound:
        status = CheckStatus.PASS
        detail = f"residual slope below {bound:g}"
    else:
        status = CheckStatus.FAIL
        detail = f"residual slope not below {bound:g}"
    return CheckResult(
        name=name,
        observed=slope,
        predicted=bound,
        se=math.nan,
        multiplier=float(multiplier),
        status=status,
        detail=detail,
    )


# =============================================================================
# Expansions of the four losses and of V
# =============================================================================


def loss_expansions(constants, n, beta):
    """
    Predicted E[X] - S for the four losses, E[V], and their 1/n scales.
    """
    lam, nu = constants.lambda_, constants.nu
    return {
        "B_g": ("b_g_excess", (lam - nu) / (n * beta) + nu / n, (abs(lam - nu) / beta + nu) / n),
        "B_t": ("b_t_excess", (lam - nu) / (n * beta) - nu / n, (abs(lam - nu) / beta + nu) / n),
        "G_g": ("g_g_excess", lam / (n * beta) + nu / n, (lam / beta + nu) / n),
        "G_t": ("g_t_excess", lam / (n * beta) - nu / n, (lam / beta + nu) / n),
        "V": ("v", 2.0 * nu / beta, 2.0 * nu / beta),
    }


def verify_theorem1(aggregate, constants, multiplier=3.0):
    """
    At the largest n, E[B_g], E[B_t], E[G_g], E[G_t] and E[V] against their
    expansions for every finite beta; across n, each loss residual must
    decay faster than 1/n and the V residual must vanish.
    """
    results = []
    ns = aggregate.ns
    n_max = ns[-1]
    for beta in [b for b in aggregate.betas if not math.isinf(b)]:
        label = beta_label(beta)
        cell = aggregate.cell(n_max, beta)
        for name, (field, predicted, scale) in loss_expansions(constants, n_max, beta).items():
            results.append(
                expansion_check(
                    f"expansion.{name}[beta={label}]",
                    cell.mean(field),
                    predicted,
                    cell.se(field),
                    multiplier,
                    scale=scale,
                    detail="" if name == "V" else "excess over S",
                )
            )

        if len(ns) >= 3:
            for name in ("B_g", "B_t", "G_g", "G_t", "V"):
                residuals, ses = [], []
                for n in ns:
                    field, predicted, _ = loss_expansions(constants, n, beta)[name]
                    residuals.append(aggregate.cell(n, beta).mean(field) - predicted)
                    ses.append(aggregate.cell(n, beta).se(field))
                bound = VANISHING_SLOPE_BOUND if name == "V" else DECAY_SLOPE_BOUND
                results.append(
                    decay_check(
                        f"expansion.{name}.decay[beta={label}]", ns, residuals, ses, multiplier, bound
                    )
                )
    return results


def verify_trace_identities(aggregate, constants, multiplier=3.0):
    """
    E[n(B_g - B_t)] = tr(IJ^-1) for every beta (at beta = infinity this is
    the TIC statement E[B_g] = E[B_t] + TIC/n) and E[beta V] = tr(IJ^-1)
    for finite beta.
    """
    results = []
    n_max = aggregate.ns[-1]
    for beta in aggregate.betas:
        cell = aggregate.cell(n_max, beta)
        name = (
            "tic.mle_equation"
            if math.isinf(beta)
            else f"trace.n_bayes_gap[beta={beta_label(beta)}]"
        )
        results.append(
            expansion_check(
                name,
                cell.mean("n_bayes_gap"),
                constants.tic,
                cell.se("n_bayes_gap"),
                multiplier,
                scale=constants.tic,
            )
        )
        if not math.isinf(beta):
            results.append(
                expansion_check(
                    f"trace.beta_v[beta={beta_label(beta)}]",
                    cell.mean("beta_v"),
                    constants.tic,
                    cell.se("beta_v"),
                    multiplier,
                    scale=constants.tic,
                )
            )
    return results


# =============================================================================
# Equations of states
# =============================================================================


def verify_equations_of_state(aggregate, multiplier=3.0):
    """
    E[B_g] - E[B_t] = (beta/n) E[V] and E[G_g] - E[G_t] = (beta/n) E[V] at
    every (n, finite beta); residual decay across n; and the guard that the
    per-replication residual, scaled by n, keeps a non-vanishing spread.
    """
    results = []
    ns = aggregate.ns
    for beta in [b for b in aggregate.betas if not math.isinf(b)]:
        label = beta_label(beta)
        for n in ns:
            cell = aggregate.cell(n, beta)
            for kind in ("bayes", "gibbs"):
                field = f"eos_{kind}"
                results.append(
                    expansion_check(
                        f"eos.{kind}[n={n},beta={label}]",
                        cell.mean(field),
                        0.0,
                        cell.se(field),
                        multiplier,
                        scale=cell.mean("beta_v_over_n"),
                    )
                )
        if len(ns) < 3:
            continue
        for kind in ("bayes", "gibbs"):
            field = f"eos_{kind}"
            results.append(
                decay_check(
                    f"eos.{kind}.decay[beta={label}]",
                    ns,
                    [aggregate.cell(n, beta).mean(field) for n in ns],
                    [aggregate.cell(n, beta).se(field) for n in ns],
                    multiplier,
                )
            )
        spreads = [
            aggregate.cell(n, beta).se("n_eos_bayes") * math.sqrt(aggregate.cell(n, beta).count)
            for n in ns
        ]
        fit = fit_scaling("sd of n * equation-of-state residual", ns, spreads)
        results.append(
            slope_check(f"eos.random_variable_guard[beta={label}]", fit, 0.0, SPREAD_SLOPE_BAND)
        )
    return results


# =============================================================================
# beta V against TIC and TIC_n
# =============================================================================


def verify_theorem2_scaling(rows, constants, beta):
    """
    Per-n RMS over replications of (TIC_n - TIC), (beta V - TIC) and
    (beta V - TIC_n) and their log-log slopes.

    Raises:
        InvalidInput: beta is not finite.
        InsufficientPoints: fewer than three values of n.
    """
    if math.isinf(beta):
        raise InvalidInput("beta V scaling needs a finite beta")
    selected = rows_for(rows, beta=beta)
    ns = sorted({int(row["n"]) for row in selected})
    if len(ns) < 3:
        raise InsufficientPoints(f"{len(ns)} sample sizes at beta={beta:g}, need at least 3")

    rms = {"tic_n - TIC": [], "beta V - TIC": [], "beta V - TIC_n": []}
    for n in ns:
        cell_rows = rows_for(selected, n=n)
        tic_n = np.array([row["tic_n"] for row in cell_rows])
        beta_v = beta * np.array([row["v"] for row in cell_rows])
        rms["tic_n - TIC"].append(math.sqrt(np.mean((tic_n - constants.tic) ** 2)))
        rms["beta V - TIC"].append(math.sqrt(np.mean((beta_v - constants.tic) ** 2)))
        rms["beta V - TIC_n"].append(math.sqrt(np.mean((beta_v - tic_n) ** 2)))
    return tuple(fit_scaling(name, ns, values) for name, values in rms.items())


def tic_scaling_checks(rows, constants, beta):
    label = beta_label(beta)
    tic_gap, v_gap, v_tic_n = verify_theorem2_scaling(rows, constants, beta)
    return [
        slope_check(f"tic_scaling.tic_n_vs_tic[beta={label}]", tic_gap, -0.5, HALF_RATE_BAND),
        slope_check(f"tic_scaling.beta_v_vs_tic[beta={label}]", v_gap, -0.5, HALF_RATE_BAND),
        slope_check(f"tic_scaling.beta_v_vs_tic_n[beta={label}]", v_tic_n, -1.0, UNIT_RATE_BAND),
    ]


# =============================================================================
# Posterior moments and D-terms
# =============================================================================


def d_term_expansions(constants, n, beta):
    d, nu, mu = constants.d, constants.nu, constants.mu
    return {
        "d1": (d / (2 * n * beta) + nu / n, (d / (2 * beta) + nu) / n),
        "d2": (nu / (n * beta) + mu / n, (nu / beta + mu) / n),
        "d3": (mu / n, mu / n),
        "d4": (d / (2 * n * beta) - nu / n, (d / (2 * beta) + nu) / n),
        "d5": (nu / (n * beta) + mu / n, (nu / beta + mu) / n),
        "d6": (mu / n, mu / n),
    }


def _rms(values):
    values = np.asarray(values, dtype=float)
    return math.sqrt(float(np.mean(values**2)))


def _relative_frobenius(observed, expected):
    return float(np.linalg.norm(observed - expected) / np.linalg.norm(expected))


def _moment_slope_check(name, ns, values, predicted, tolerance):
    """Slope band check that passes outright when the quantity vanishes."""
    if max(values) <= VANISHING:
        return CheckResult(
            name=name,
            observed=0.0,
            predicted=predicted,
            se=math.nan,
            multiplier=tolerance,
            status=CheckStatus.PASS,
            detail="vanishes identically at every n",
        )
    return slope_check(name, fit_scaling(name, ns, values), predicted, tolerance)


def verify_lemmas(rows, aggregate, geometry, multiplier=3.0):
    """
    D-terms: the six E[D_k] at the largest n, and D5 - D2, D6 - D3 = o(1/n).
    Moments: sandwich covariance of sqrt(n)(w_hat - w0), the second moment
    around w0, the Laplace second moment around w_hat, posterior moment
    scaling, the MAP-MLE gap, and exact zeros on plug-in rows.
    """
    constants, pair = geometry.constants, geometry.pair
    d = constants.d
    w0 = np.asarray(geometry.w0, dtype=float)
    ns = aggregate.ns
    n_max = ns[-1]
    results = []

    for beta in [b for b in aggregate.betas if not math.isinf(b)]:
        label = beta_label(beta)
        cell = aggregate.cell(n_max, beta)
        for name, (predicted, scale) in d_term_expansions(constants, n_max, beta).items():
            results.append(
                expansion_check(
                    f"dterms.{name}[beta={label}]",
                    cell.mean(name),
                    predicted,
                    cell.se(name),
                    multiplier,
                    scale=scale,
                )
            )

        top = rows_for(rows, n=n_max, beta=beta)
        offsets = np.array([np.sqrt(n_max) * (unflatten_vector(row, "w_map", d) - w0) for row in top])
        covariance = np.atleast_2d(np.cov(offsets, rowvar=False, ddof=1))
        results.append(
            band_check(
                f"moments.sandwich_covariance[beta={label}]",
                _relative_frobenius(covariance, pair.sandwich),
                0.0,
                COVARIANCE_REL_TOLERANCE,
                detail="relative Frobenius error against J^-1 I J^-1",
            )
        )

        second = np.mean([unflatten_matrix(row, "w0_second_moment", d) for row in top], axis=0)
        expected = pair.sandwich / n_max + pair.j_inverse / (n_max * beta)
        results.append(
            band_check(
                f"moments.w0_second_moment[beta={label}]",
                _relative_frobenius(second, expected),
                0.0,
                COVARIANCE_REL_TOLERANCE,
                detail="relative Frobenius error against J^-1 I J^-1/n + J^-1/(n beta)",
            )
        )

        spread = np.mean([unflatten_matrix(row, "second_moment", d) for row in top], axis=0)
        laplace = np.mean([unflatten_matrix(row, "laplace_cov", d) for row in top], axis=0)
        results.append(
            band_check(
                f"moments.laplace_second_moment[beta={label}]",
                _relative_frobenius(spread, laplace),
                0.0,
                LAPLACE_GAP_CONSTANT / n_max,
                detail="relative Frobenius error against K_n^-1/(n beta)",
            )
        )

        if len(ns) < 3:
            continue
        for kind in ("d5_minus_d2", "d6_minus_d3"):
            results.append(
                decay_check(
                    f"dterms.{kind}.decay[beta={label}]",
                    ns,
                    [aggregate.cell(n, beta).mean(kind) for n in ns],
                    [aggregate.cell(n, beta).se(kind) for n in ns],
                    multiplier,
                )
            )

        mean_offset, third, w0_third, gap = [], [], [], []
        for n in ns:
            cell_rows = rows_for(rows, n=n, beta=beta)
            mean_offset.append(
                _rms([np.linalg.norm(unflatten_vector(row, "mean_offset", d)) for row in cell_rows])
            )
            third.append(_rms([row["third_abs_moment"] for row in cell_rows]))
            w0_third.append(float(np.mean([row["w0_third_abs_moment"] for row in cell_rows])))
            gap.append(
                _rms(
                    [
                        np.linalg.norm(unflatten_vector(row, "w_map", d) - unflatten_vector(row, "w_mle", d))
                        for row in cell_rows
                    ]
                )
            )
        results.append(
            _moment_slope_check(
                f"moments.mean_offset_rate[beta={label}]", ns, mean_offset, -1.0, UNIT_RATE_BAND
            )
        )
        results.append(
            _moment_slope_check(
                f"moments.third_moment_rate[beta={label}]", ns, third, -1.5, UNIT_RATE_BAND
            )
        )
        w0_fit = fit_scaling("E E_w|w - w0|^3", ns, w0_third)
        results.append(
            CheckResult(
                name=f"moments.w0_third_moment_decay[beta={label}]",
                observed=w0_fit.slope,
                predicted=DECAY_SLOPE_BOUND,
                se=w0_fit.slope_se,
                multiplier=math.nan,
                status=CheckStatus.PASS if w0_fit.slope < DECAY_SLOPE_BOUND else CheckStatus.FAIL,
                detail="o(1/n): slope below -1 + 0.3",
            )
        )
        # O_p(1/n) is an upper bound on the MAP-MLE gap
        if max(gap) <= VANISHING:
            gap_slope, gap_se = -math.inf, math.nan
        else:
            gap_fit = fit_scaling("|w_map - w_mle|", ns, gap)
            gap_slope, gap_se = gap_fit.slope, gap_fit.slope_se
        results.append(
            CheckResult(
                name=f"moments.map_mle_gap_rate[beta={label}]",
                observed=gap_slope,
                predicted=-1.0,
                se=gap_se,
                multiplier=UNIT_RATE_BAND,
                status=(
                    CheckStatus.PASS if gap_slope <= -1.0 + UNIT_RATE_BAND else CheckStatus.FAIL
                ),
                detail="O_p(1/n): slope at most -1 + 0.2",
            )
        )

    plugin = rows_for(rows, beta=math.inf)
    if plugin:
        largest = max(
            max(
                np.max(np.abs(unflatten_vector(row, "mean_offset", d))),
                np.max(np.abs(unflatten_matrix(row, "second_moment", d))),
                abs(row["third_abs_moment"]),
            )
            for row in plugin
        )
        results.append(
            band_check(
                "moments.plugin_spread_zero",
                largest,
                0.0,
                0.0,
                detail="posterior spread moments on beta = infinity rows",
            )
        )
    return results


# =============================================================================
# Per-row identities
# =============================================================================


def verify_identities(rows):
    """
    WAIC = n B_t + beta V and V = 2n(D5 - D6) to 1e-10, and the Jensen
    orderings B_t <= G_t, B_g <= G_g, V >= 0, on every successful row.
    """
    good = rows_for(rows)
    waic_error, v_error, violations = 0.0, 0.0, 0
    for row in good:
        n, beta = row["n"], row["beta"]
        penalty = 0.0 if math.isinf(beta) else beta * row["v"]
        waic_error = max(waic_error, abs(row["waic"] - n * row["b_t"] - penalty))
        v_error = max(v_error, abs(row["v"] - 2 * n * (row["d5"] - row["d6"])))
        if not (
            row["b_t"] <= row["g_t"] + 1e-12 and row["b_g"] <= row["g_g"] + 1e-12 and row["v"] >= 0
        ):
            violations += 1
    return [
        band_check(
            "identity.waic", waic_error, 0.0, IDENTITY_TOLERANCE, detail="max |WAIC - n B_t - beta V|"
        ),
        band_check(
            "identity.v_dterms", v_error, 0.0, IDENTITY_TOLERANCE, detail="max |V - 2n(D5 - D6)|"
        ),
        band_check(
            "identity.jensen", violations, 0.0, 0.0, detail="rows violating B_t <= G_t, B_g <= G_g, V >= 0"
        ),
    ]


def verify_waic(aggregate, multiplier=3.0):
    """E[WAIC] = E[n B_g] at the largest n for every finite beta."""
    results = []
    n_max = aggregate.ns[-1]
    for beta in [b for b in aggregate.betas if not math.isinf(b)]:
        cell = aggregate.cell(n_max, beta)
        results.append(
            expansion_check(
                f"waic.unbiased[beta={beta_label(beta)}]",
                cell.mean("waic_gap"),
                0.0,
                cell.se("waic_gap"),
                multiplier,
                scale=cell.mean("beta_v"),
            )
        )
    return results


# =============================================================================
# Backend agreement
# =============================================================================

BACKEND_FIELDS = ("b_t", "v")


def _replication_key(row):
    return int(row["n"]), float(row["beta"]), int(row["replication"])


def verify_backend_agreement(reference_rows, candidate_rows, multiplier=3.0, fields=BACKEND_FIELDS):
    """
    Paired comparison of two posterior backends run on the same training
    sets (same scenario and master seed).

    Rows are matched on (n, beta, replication). For every finite-beta cell
    the mean of candidate - reference must lie within ``multiplier``
    standard errors of zero.

    Raises:
        InvalidInput: the two studies share no finite-beta replication.
    """
    reference = {_replication_key(row): row for row in rows_for(reference_rows)}
    paired = {}
    for row in rows_for(candidate_rows):
        key = _replication_key(row)
        if key in reference and not math.isinf(key[1]):
            paired.setdefault(key[:2], []).append((row, reference[key]))
    if not paired:
        raise InvalidInput("the two studies share no finite-beta replication")

    results = []
    for (n, beta), pairs in sorted(paired.items()):
        for field in fields:
            differences = np.array([candidate[field] - base[field] for candidate, base in pairs])
            se = (
                differences.std(ddof=1) / math.sqrt(differences.size)
                if differences.size > 1
                else math.nan
            )
            results.append(
                expansion_check(
                    f"backends.{field}[n={n},beta={beta_label(beta)}]",
                    differences.mean(),
                    0.0,
                    se,
                    multiplier,
                    detail=f"mean paired difference over {differences.size} replications",
                )
            )
    return results


# =============================================================================
# Everything
# =============================================================================


def verify_all(rows, aggregate, geometry, multiplier=3.0):
    """
    Run every suite that the study's grid supports.
    """
    constants = geometry.constants
    results = []
    results += verify_identities(rows)
    results += verify_theorem1(aggregate, constants, multiplier)
    results += verify_trace_identities(aggregate, constants, multiplier)
    results += verify_equations_of_state(aggregate, multiplier)
    results += verify_waic(aggregate, multiplier)
    results += verify_lemmas(rows, aggregate, geometry, multiplier)
    for beta in [b for b in aggregate.betas if not math.isinf(b)]:
        try:
            results += tic_scaling_checks(rows, constants, beta)
        except InsufficientPoints as exc:
            logger.info("Skipping beta V scaling: %s", exc.detail)

    from .sweep import beta_sweep_checks

    results += beta_sweep_checks(aggregate, constants, multiplier)

    failed = [result.name for result in results if result.is_hard_failure]
    logger.info(
        "%d checks: %d passed, %d insufficient precision, %d failed",
        len(results),
        sum(result.passed for result in results),
        sum(result.status == CheckStatus.INSUFFICIENT_PRECISION for result in results),
        len(failed),
    )
    if failed:
        logger.warning("Failed checks: %s", ", ".join(failed))
    return results
