"""
Tests for the verification suites and the beta sweep on synthetic
aggregates whose means sit exactly on (or far from) the predicted values.

Run with:
    python -m pytest experiments/tests/test_verification.py -v
"""

import math

import numpy as np
from django.test import SimpleTestCase

from config.exceptions import InsufficientPoints, InvalidInput
from experiments.models import AggregateCell, AggregateReport, CheckStatus, ExperimentConfig
from experiments.sweep import beta_sweep, beta_sweep_checks, predicted_b_g, sweep_table
from experiments.verification import (
    beta_label,
    decay_check,
    expansion_check,
    fit_scaling,
    loss_expansions,
    verify_backend_agreement,
    verify_equations_of_state,
    verify_identities,
    verify_theorem1,
    verify_theorem2_scaling,
    verify_trace_identities,
    verify_waic,
)
from functionals.schema import STATUS_OK, numeric_fields
from geometry.population import AsymptoticConstants
from scenarios.catalog import GAUSS_WIDE

WIDE = AsymptoticConstants(S=1.918939, lambda_=0.5, nu=1.0, mu=2.0, tic=2.0, d=1)
MATCH = AsymptoticConstants(S=1.418939, lambda_=0.5, nu=0.5, mu=0.5, tic=1.0, d=1)
NS = (100, 400, 1600)
COUNT = 10_000


def exact_cell(constants, n, beta, se=1e-5, shift=None):
    """A cell whose means equal the predicted expectations."""
    means, ses = {}, {}
    if not math.isinf(beta):
        for field, predicted, _ in loss_expansions(constants, n, beta).values():
            means[field] = predicted
        means["beta_v"] = beta * means["v"]
        means["beta_v_over_n"] = means["beta_v"] / n
    else:
        means["beta_v"] = means["beta_v_over_n"] = 0.0
    means.update(
        n_bayes_gap=constants.tic,
        eos_bayes=0.0,
        eos_gibbs=0.0,
        n_eos_bayes=0.0,
        waic_gap=0.0,
        b_g=predicted_b_g(constants, n, beta),
    )
    ses = dict.fromkeys(means, se)
    ses["v"] = ses["beta_v"] = 1e-3
    ses["n_bayes_gap"] = 1e-2
    # sd of n * residual stays constant in n
    ses["n_eos_bayes"] = 1.0 / math.sqrt(COUNT)
    for name, value in (shift or {}).items():
        means[name] += value
    return AggregateCell(n=n, beta=beta, count=COUNT, failed=0, means=means, ses=ses)


def exact_report(constants, betas=(1.0, math.inf), ns=NS, shifts=None):
    shifts = shifts or {}
    cells = {
        (n, beta): exact_cell(constants, n, beta, shift=shifts.get((n, beta)))
        for n in ns
        for beta in betas
    }
    return AggregateReport(scenario_id=GAUSS_WIDE, cells=cells)


def by_name(results):
    return {result.name: result for result in results}


# =============================================================================
# Check builders
# =============================================================================


class CheckBuilderTests(SimpleTestCase):
    def test_expansion_check_statuses(self):
        self.assertEqual(expansion_check("x", 1.02, 1.0, 0.01, 3.0).status, CheckStatus.PASS)
        self.assertEqual(expansion_check("x", 1.05, 1.0, 0.01, 3.0).status, CheckStatus.FAIL)
        self.assertEqual(
            expansion_check("x", 1.05, 1.0, math.nan, 3.0).status,
            CheckStatus.INSUFFICIENT_PRECISION,
        )

    def test_error_budget_guard(self):
        """SE must be below a third of the 1/n scale it is meant to resolve."""
        result = expansion_check("x", 5.0, 0.0, 0.01, 3.0, scale=0.03)
        self.assertEqual(result.status, CheckStatus.INSUFFICIENT_PRECISION)
        self.assertFalse(result.is_hard_failure)
        self.assertEqual(
            expansion_check("x", 0.0, 0.0, 0.009, 3.0, scale=0.03).status, CheckStatus.PASS
        )

    def test_check_result_as_dict(self):
        payload = expansion_check("x", 1.0, 1.0, 0.1, 3.0).as_dict()
        self.assertEqual(payload["status"], "pass")
        self.assertTrue(payload["pass"])
        self.assertEqual(payload["name"], "x")

    def test_fit_scaling_recovers_power_law(self):
        ns = np.array(NS, dtype=float)
        fit = fit_scaling("q", ns, 3.0 * ns**-0.5)
        self.assertAlmostEqual(fit.slope, -0.5, places=12)
        self.assertAlmostEqual(fit.intercept, math.log(3.0), places=12)

    def test_fit_scaling_needs_three_points(self):
        with self.assertRaises(InsufficientPoints):
            fit_scaling("q", [100, 400], [1.0, 0.5])

    def test_decay_check(self):
        ns = np.array(NS, dtype=float)
        fast = decay_check("fast", ns, ns**-2.0, [1e-12] * 3, 3.0)
        slow = decay_check("slow", ns, ns**-0.5, [1e-12] * 3, 3.0)
        noisy = decay_check("noise", ns, [1e-3, -2e-3, 1e-3], [1e-3] * 3, 3.0)
        self.assertEqual(fast.status, CheckStatus.PASS)
        self.assertAlmostEqual(fast.observed, -2.0, places=9)
        self.assertEqual(slow.status, CheckStatus.FAIL)
        self.assertEqual(noisy.status, CheckStatus.PASS)

    def test_beta_label(self):
        self.assertEqual(beta_label(math.inf), "inf")
        self.assertEqual(beta_label(0.5), "0.5")
        self.assertEqual(beta_label(2.0), "2")


# =============================================================================
# Expansions and equations of state
# =============================================================================


class ExpansionSuiteTests(SimpleTestCase):
    def test_exact_means_pass_every_check(self):
        report = exact_report(WIDE)
        results = (
            verify_theorem1(report, WIDE)
            + verify_trace_identities(report, WIDE)
            + verify_equations_of_state(report)
            + verify_waic(report)
        )
        names = by_name(results)
        self.assertIn("expansion.B_g[beta=1]", names)
        self.assertIn("expansion.V.decay[beta=1]", names)
        self.assertIn("tic.mle_equation", names)
        self.assertIn("trace.beta_v[beta=1]", names)
        self.assertIn("eos.bayes[n=1600,beta=1]", names)
        self.assertIn("eos.random_variable_guard[beta=1]", names)
        self.assertIn("waic.unbiased[beta=1]", names)
        failing = [result.name for result in results if not result.passed]
        self.assertEqual(failing, [])

    def test_shifted_bayes_loss_fails(self):
        report = exact_report(WIDE, shifts={(1600, 1.0): {"b_g_excess": 1e-3}})
        results = by_name(verify_theorem1(report, WIDE))
        self.assertEqual(results["expansion.B_g[beta=1]"].status, CheckStatus.FAIL)
        self.assertEqual(results["expansion.G_g[beta=1]"].status, CheckStatus.PASS)

    def test_biased_equation_of_state_fails(self):
        shifts = {(n, 1.0): {"eos_bayes": 0.05 / math.sqrt(n)} for n in NS}
        results = by_name(verify_equations_of_state(exact_report(WIDE, shifts=shifts)))
        self.assertEqual(results["eos.bayes[n=100,beta=1]"].status, CheckStatus.FAIL)
        self.assertEqual(results["eos.bayes.decay[beta=1]"].status, CheckStatus.FAIL)
        self.assertEqual(results["eos.gibbs[n=100,beta=1]"].status, CheckStatus.PASS)

    def test_wrong_tic_fails_trace_identity(self):
        results = by_name(verify_trace_identities(exact_report(WIDE), MATCH))
        self.assertEqual(results["tic.mle_equation"].status, CheckStatus.FAIL)

    def test_two_sample_sizes_skip_decay_checks(self):
        report = exact_report(WIDE, ns=(100, 400))
        names = by_name(verify_theorem1(report, WIDE))
        self.assertIn("expansion.B_g[beta=1]", names)
        self.assertNotIn("expansion.B_g.decay[beta=1]", names)


# =============================================================================
# Row-level checks
# =============================================================================


def scaling_rows(beta, ns=NS, tic=2.0, replications=200):
    """Rows whose tic_n and beta V scatter around TIC at the theoretical rates."""
    rng = np.random.default_rng(4)
    rows = []
    for n in ns:
        for r in range(replications):
            tic_n = tic + rng.standard_normal() / math.sqrt(n)
            beta_v = tic_n + rng.standard_normal() / n
            row = dict.fromkeys(numeric_fields(1), 0.0)
            row.update(
                scenario_id=GAUSS_WIDE,
                n=n,
                beta=beta,
                replication=r,
                seed=r,
                status=STATUS_OK,
                tic_n=tic_n,
                v=beta_v / beta,
            )
            rows.append(row)
    return rows


class RowCheckTests(SimpleTestCase):
    def test_tic_scaling_slopes(self):
        tic_gap, v_gap, v_tic_n = verify_theorem2_scaling(scaling_rows(2.0), WIDE, 2.0)
        self.assertAlmostEqual(tic_gap.slope, -0.5, delta=0.15)
        self.assertAlmostEqual(v_gap.slope, -0.5, delta=0.15)
        self.assertAlmostEqual(v_tic_n.slope, -1.0, delta=0.2)

    def test_tic_scaling_needs_finite_beta_and_three_sizes(self):
        with self.assertRaises(InvalidInput):
            verify_theorem2_scaling(scaling_rows(1.0), WIDE, math.inf)
        with self.assertRaises(InsufficientPoints):
            verify_theorem2_scaling(scaling_rows(1.0, ns=(100, 400)), WIDE, 1.0)

    def test_identities_on_consistent_rows(self):
        row = dict.fromkeys(numeric_fields(1), 0.0)
        row.update(scenario_id=GAUSS_WIDE, n=10, beta=2.0, replication=0, seed=0, status=STATUS_OK)
        # WAIC = n B_t + beta V and V = 2n(D5 - D6)
        row.update(b_t=1.0, g_t=1.2, b_g=1.5, g_g=1.6, v=0.4, waic=10.8, d5=0.03, d6=0.01)
        results = by_name(verify_identities([row]))
        self.assertTrue(all(result.passed for result in results.values()))

        broken = dict(row, waic=11.0, b_t=1.3)
        results = by_name(verify_identities([broken]))
        self.assertEqual(results["identity.waic"].status, CheckStatus.FAIL)
        self.assertEqual(results["identity.jensen"].observed, 1.0)


class BackendAgreementCheckTests(SimpleTestCase):
    def setUp(self):
        self.grid = scaling_rows(1.0, ns=(100,), replications=50) + scaling_rows(
            math.inf, ns=(100,), replications=50
        )
        noise = np.random.default_rng(8).standard_normal(50) * 1e-3
        # centred, so the paired mean difference is zero up to rounding
        self.noise = np.tile(noise - noise.mean(), 2)

    def metropolis(self, offset=0.0):
        return [
            dict(row, b_t=row["b_t"] + noise + offset, v=row["v"] + noise)
            for row, noise in zip(self.grid, self.noise)
        ]

    def test_noisy_copy_agrees(self):
        results = by_name(verify_backend_agreement(self.grid, self.metropolis()))
        self.assertEqual(set(results), {"backends.b_t[n=100,beta=1]", "backends.v[n=100,beta=1]"})
        for result in results.values():
            self.assertEqual(result.status, CheckStatus.PASS)

    def test_shifted_training_loss_fails(self):
        results = by_name(verify_backend_agreement(self.grid, self.metropolis(offset=0.01)))
        self.assertEqual(results["backends.b_t[n=100,beta=1]"].status, CheckStatus.FAIL)
        self.assertEqual(results["backends.v[n=100,beta=1]"].status, CheckStatus.PASS)

    def test_rows_pair_by_replication_not_by_order(self):
        shuffled = list(reversed(self.metropolis()))
        results = by_name(verify_backend_agreement(self.grid, shuffled))
        self.assertTrue(all(result.passed for result in results.values()))

    def test_single_pair_is_insufficient_precision(self):
        results = verify_backend_agreement(self.grid[:1], self.metropolis()[:1])
        self.assertTrue(all(r.status == CheckStatus.INSUFFICIENT_PRECISION for r in results))

    def test_disjoint_studies_rejected(self):
        plugin_only = [row for row in self.grid if math.isinf(row["beta"])]
        with self.assertRaises(InvalidInput):
            verify_backend_agreement(plugin_only, plugin_only)


# =============================================================================
# Beta sweep
# =============================================================================


class BetaSweepTests(SimpleTestCase):
    betas = (0.5, 1.0, 2.0, math.inf)

    def test_predicted_b_g(self):
        """Infinite beta gives S + TIC/(2n); beta = 1 gives S + d/(2n)."""
        self.assertAlmostEqual(predicted_b_g(WIDE, 100, math.inf), WIDE.S + 0.01)
        self.assertAlmostEqual(predicted_b_g(WIDE, 100, 1.0), WIDE.S + 0.005)

    def test_exact_sweep_passes(self):
        report = exact_report(WIDE, betas=self.betas)
        results = by_name(beta_sweep_checks(report, WIDE))
        self.assertEqual(len(results), 4)
        self.assertTrue(all(result.passed for result in results.values()))
        # d < TIC: E[B_g] decreases in 1/beta
        self.assertLess(results["sweep.direction"].observed, 0.0)

    def test_matching_scenario_is_flat(self):
        report = exact_report(MATCH, betas=self.betas)
        direction = by_name(beta_sweep_checks(report, MATCH))["sweep.direction"]
        self.assertEqual(direction.status, CheckStatus.PASS)
        self.assertIn("flat", direction.detail)

    def test_table_rows(self):
        points = sweep_table(exact_report(WIDE, betas=self.betas, ns=(100,)), WIDE)
        self.assertEqual([point.inv_beta for point in points], [0.0, 0.5, 1.0, 2.0])
        self.assertEqual(points[0].gap, 0.0)
        self.assertAlmostEqual(points[3].predicted_gap, (1 - 2.0) * 2.0 / 200)

    def test_short_grid_has_no_checks(self):
        self.assertEqual(beta_sweep_checks(exact_report(WIDE), WIDE), [])

    def test_sweep_rejects_short_grid(self):
        for grid in ((0.5, 1.0, 2.0), (1.0, 2.0, math.inf)):
            with self.subTest(grid=grid):
                with self.assertRaises(InvalidInput):
                    beta_sweep(ExperimentConfig(scenario_id=GAUSS_WIDE, beta_grid=grid))
