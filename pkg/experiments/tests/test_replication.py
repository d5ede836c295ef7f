"""
Tests for the replication runner and the per-cell aggregation.

Run with:
    python -m pytest experiments/tests/test_replication.py -v
"""

import math
from unittest.mock import patch

import numpy as np
import pytest
from django.test import SimpleTestCase

from config.exceptions import NoConvergence, ReplicationAborted
from config.utils.seeding import derive_seed
from experiments.aggregation import aggregate, derived_quantities, rows_for
from experiments.models import ExperimentConfig
from experiments.replication import iter_replications, replicate_one, run_replications, work_items
from functionals.schema import STATUS_OK, failed_row, numeric_fields, row_fields
from scenarios.catalog import GAUSS_WIDE

W0 = (0.0,)


def small_config(**overrides):
    values = {
        "scenario_id": GAUSS_WIDE,
        "n_grid": (30, 60),
        "beta_grid": (1.0, math.inf),
        "replications": 2,
        "master_seed": 7,
    }
    values.update(overrides)
    return ExperimentConfig(**values)


# =============================================================================
# Work items and rows
# =============================================================================


class WorkItemTests(SimpleTestCase):
    def test_items_ordered_by_n_beta_replication(self):
        config = small_config()
        items = list(work_items(config, W0))
        self.assertEqual(len(items), config.total_rows)
        self.assertEqual(
            [(item.n, item.beta, item.replication) for item in items[:4]],
            [(30, 1.0, 0), (30, 1.0, 1), (30, math.inf, 0), (30, math.inf, 1)],
        )
        self.assertEqual(items[0].seed, derive_seed(7, GAUSS_WIDE, 30, 1.0, 0))
        self.assertEqual(len({item.seed for item in items}), len(items))

    def test_cells_and_finite_betas(self):
        config = small_config()
        self.assertEqual(config.finite_betas, (1.0,))
        self.assertEqual(config.cells[0], (30, 1.0))
        self.assertEqual(config.total_rows, 8)


class ReplicateOneTests(SimpleTestCase):
    def test_row_has_schema_columns(self):
        item = next(work_items(small_config(), W0))
        row = replicate_one(item)
        self.assertEqual(list(row), row_fields(1))
        self.assertEqual(row["status"], STATUS_OK)
        self.assertEqual(row["seed"], item.seed)
        finite = [name for name in numeric_fields(1) if name != "acceptance_rate"]
        self.assertTrue(all(math.isfinite(row[name]) for name in finite))
        self.assertTrue(math.isnan(row["acceptance_rate"]))

    def test_lab_error_becomes_flagged_row(self):
        item = next(work_items(small_config(), W0))
        with patch("experiments.replication.loss_report", side_effect=NoConvergence("stuck")):
            row = replicate_one(item)
        self.assertEqual(row["status"], "no_convergence")
        self.assertTrue(math.isnan(row["b_g"]))
        self.assertEqual(row["replication"], 0)


# =============================================================================
# Study driver
# =============================================================================


class StudyTests(SimpleTestCase):
    def test_rows_are_deterministic(self):
        config = small_config()
        first = run_replications(config, W0, workers=1)
        second = run_replications(config, W0, workers=1)
        self.assertEqual(len(first), config.total_rows)
        np.testing.assert_equal(first, second)

    def test_seed_changes_rows(self):
        first = run_replications(small_config(replications=1), W0, workers=1)
        second = run_replications(small_config(replications=1, master_seed=8), W0, workers=1)
        self.assertNotEqual(first[0]["b_g"], second[0]["b_g"])

    def test_w0_defaults_to_scenario_geometry(self):
        config = small_config(n_grid=(30,), beta_grid=(1.0,), replications=1)
        with_default = run_replications(config, workers=1)
        explicit = run_replications(config, W0, workers=1)
        self.assertAlmostEqual(with_default[0]["d4"], explicit[0]["d4"], places=8)

    def test_too_many_failures_abort(self):
        config = small_config()
        with self.settings(EOS_ABORT_FAILURE_RATE=0.01):
            with patch("experiments.replication.loss_report", side_effect=NoConvergence()):
                with self.assertRaises(ReplicationAborted):
                    list(iter_replications(config, W0, workers=1))

    def test_failures_within_budget_are_kept(self):
        config = small_config()
        with self.settings(EOS_ABORT_FAILURE_RATE=1.0):
            with patch("experiments.replication.loss_report", side_effect=NoConvergence()):
                rows = run_replications(config, W0, workers=1)
        self.assertEqual(len(rows), config.total_rows)
        self.assertTrue(all(row["status"] == "no_convergence" for row in rows))


@pytest.mark.slow
class WorkerCountTests(SimpleTestCase):
    def test_worker_count_does_not_change_rows(self):
        config = small_config(replications=3)
        serial = run_replications(config, W0, workers=1)
        parallel = run_replications(config, W0, workers=2)
        np.testing.assert_equal(serial, parallel)


# =============================================================================
# Aggregation
# =============================================================================


def synthetic_row(n=100, beta=2.0, replication=0, status=STATUS_OK, **values):
    row = dict.fromkeys(numeric_fields(1), 0.0)
    row.update(
        scenario_id=GAUSS_WIDE,
        n=n,
        beta=beta,
        replication=replication,
        seed=replication,
        status=status,
    )
    row.update(values)
    return row


class DerivedQuantityTests(SimpleTestCase):
    def test_excesses_are_relative_to_training_loss_at_w0(self):
        row = synthetic_row(
            b_g=2.0, b_t=1.5, g_g=2.2, g_t=1.7, d4=0.1, v=10.0, waic=170.0, d5=0.3, d2=0.2
        )
        derived = derived_quantities(row, S=1.9)
        self.assertAlmostEqual(derived["train_loss_at_w0"], 1.6)
        self.assertAlmostEqual(derived["beta_v"], 20.0)
        self.assertAlmostEqual(derived["beta_v_over_n"], 0.2)
        self.assertAlmostEqual(derived["b_g_excess"], 0.1)
        self.assertAlmostEqual(derived["b_t_excess"], -0.1)
        self.assertAlmostEqual(derived["g_t_excess"], 0.1)
        self.assertAlmostEqual(derived["eos_bayes"], 0.1 + 0.1 - 0.2)
        self.assertAlmostEqual(derived["eos_gibbs"], 0.3 - 0.1 - 0.2)
        self.assertAlmostEqual(derived["n_bayes_gap"], 20.0)
        self.assertAlmostEqual(derived["waic_gap"], 170.0 - 160.0 - 10.0)
        self.assertAlmostEqual(derived["d5_minus_d2"], 0.1)

    def test_plugin_row_has_no_penalty(self):
        derived = derived_quantities(synthetic_row(beta=math.inf, v=0.0), S=1.0)
        self.assertEqual(derived["beta_v"], 0.0)


class AggregateTests(SimpleTestCase):
    def test_means_and_standard_errors(self):
        rows = [synthetic_row(replication=r, b_g=value) for r, value in enumerate([1.0, 2.0, 3.0])]
        report = aggregate(rows, S=0.0)
        cell = report.cell(100, 2.0)
        self.assertEqual(cell.count, 3)
        self.assertEqual(cell.failed, 0)
        self.assertAlmostEqual(cell.mean("b_g"), 2.0)
        self.assertAlmostEqual(cell.se("b_g"), 1.0 / math.sqrt(3.0))
        self.assertAlmostEqual(cell.mean("b_g_excess"), 2.0)
        self.assertEqual(report.scenario_id, GAUSS_WIDE)

    def test_flagged_rows_are_counted_not_averaged(self):
        rows = [
            synthetic_row(replication=0, b_g=1.0),
            synthetic_row(replication=1, b_g=5.0),
            failed_row(GAUSS_WIDE, 100, 2.0, 2, 2, "no_convergence", 1),
        ]
        cell = aggregate(rows, S=0.0).cell(100, 2.0)
        self.assertEqual((cell.count, cell.failed), (2, 1))
        self.assertAlmostEqual(cell.mean("b_g"), 3.0)

    def test_single_row_has_undefined_standard_error(self):
        cell = aggregate([synthetic_row()], S=0.0).cell(100, 2.0)
        self.assertTrue(math.isnan(cell.se("b_g")))

    def test_cells_sorted_accessors(self):
        rows = [synthetic_row(n=400, beta=math.inf), synthetic_row(n=100, beta=1.0)]
        report = aggregate(rows, S=0.0)
        self.assertEqual(report.ns, [100, 400])
        self.assertEqual(report.betas, [1.0, math.inf])

    def test_rows_for_filters_ok_rows(self):
        rows = [
            synthetic_row(n=100, beta=1.0),
            synthetic_row(n=400, beta=1.0),
            synthetic_row(n=100, beta=1.0, status="singular_Jn"),
        ]
        self.assertEqual(len(rows_for(rows)), 2)
        self.assertEqual(len(rows_for(rows, n=100)), 1)
        self.assertEqual(len(rows_for(rows, beta=2.0)), 0)

    def test_aggregate_of_real_rows(self):
        rows = run_replications(small_config(replications=3), W0, workers=1)
        report = aggregate(rows, S=1.918939, d=1)
        cell = report.cell(60, math.inf)
        self.assertEqual(cell.count, 3)
        self.assertEqual(cell.mean("v"), 0.0)
        self.assertAlmostEqual(
            cell.mean("b_g_excess"),
            float(np.mean([row["b_g"] for row in rows_for(rows, n=60, beta=math.inf)])) - 1.918939,
        )
