"""
Tests for the scenario catalog, the parametric models and the model
property diagnostics.

Run with:
    python -m pytest scenarios/tests/test_scenarios.py -v
"""

import math
from dataclasses import dataclass
from unittest.mock import patch

import numpy as np
from django.test import SimpleTestCase

from config.exceptions import SingularScenario, UnknownScenario
from config.utils.seeding import make_rng
from geometry.population import OptimalPoint
from scenarios.catalog import (
    GAUSS_MATCH,
    GAUSS_NARROW,
    GAUSS_SCALE_LAPLACE,
    GAUSS_WIDE,
    builtin_scenarios,
    classify_scenario,
    get_scenario,
)
from scenarios.diagnostics import (
    gradient_error,
    hessian_error,
    normalization_error,
    prior_normalization_error,
    true_density_checks,
)
from scenarios.models import (
    LOG_2PI,
    GaussianLocation,
    GaussianLocationScale,
    GaussianPrior,
    ScenarioTag,
    gaussian_truth,
)

X = np.array([-2.5, -0.3, 0.0, 0.7, 3.1])
DRAWS = 100


class ModelPropertyMixin:
    """
    Finite-difference and normalisation checks over the whole parameter box.

    Subclasses set ``model`` and ``normalization_grid`` (points of the box,
    corners included).
    """

    model = None
    normalization_grid = ()

    def random_draws(self, seed=2024):
        rng = make_rng(seed)
        box = self.model.param_box
        xs = rng.normal(0.0, 3.0, DRAWS)
        ws = rng.uniform(box[:, 0], box[:, 1], size=(DRAWS, self.model.d))
        return zip(xs, ws)

    def test_derivatives_on_random_draws(self):
        for x, w in self.random_draws():
            with self.subTest(x=x, w=tuple(w)):
                self.assertLess(gradient_error(self.model, [x], w), 1e-6)
                self.assertLess(hessian_error(self.model, [x], w), 1e-6)

    def test_normalised_across_param_box(self):
        for w in self.normalization_grid:
            w = np.array(w)
            # 12 standard deviations either side of the location
            scale = math.exp(w[1]) if w.size > 1 else 1.0
            with self.subTest(w=tuple(w)):
                error = normalization_error(self.model, w, w[0] - 12 * scale, w[0] + 12 * scale)
                self.assertLess(error, 1e-6)


# =============================================================================
# Catalog
# =============================================================================


class CatalogTests(SimpleTestCase):
    def test_builtin_ids_in_registration_order(self):
        self.assertEqual(
            list(builtin_scenarios()),
            [GAUSS_MATCH, GAUSS_WIDE, GAUSS_NARROW, GAUSS_SCALE_LAPLACE],
        )

    def test_true_variances(self):
        self.assertAlmostEqual(get_scenario(GAUSS_MATCH).true_dist.variance, 1.0)
        self.assertAlmostEqual(get_scenario(GAUSS_WIDE).true_dist.variance, 2.0)
        self.assertAlmostEqual(get_scenario(GAUSS_NARROW).true_dist.variance, 0.5)
        self.assertAlmostEqual(get_scenario(GAUSS_SCALE_LAPLACE).true_dist.variance, 2.0)

    def test_tags(self):
        self.assertEqual(get_scenario(GAUSS_MATCH).tag, ScenarioTag.PARAMETRIZABLE_REGULAR)
        for scenario_id in (GAUSS_WIDE, GAUSS_NARROW, GAUSS_SCALE_LAPLACE):
            self.assertEqual(get_scenario(scenario_id).tag, ScenarioTag.NONPARAMETRIZABLE_REGULAR)

    def test_dimensions(self):
        self.assertEqual(get_scenario(GAUSS_WIDE).d, 1)
        self.assertEqual(get_scenario(GAUSS_SCALE_LAPLACE).d, 2)

    def test_unknown_scenario_raises(self):
        with self.assertRaises(UnknownScenario) as ctx:
            get_scenario("gauss-nope")
        self.assertIn("gauss-wide", str(ctx.exception))

    def test_catalog_is_read_only(self):
        with self.assertRaises(TypeError):
            builtin_scenarios()["x"] = None


class ClassificationTests(SimpleTestCase):
    def test_matching_truth_is_parametrizable(self):
        scenario = get_scenario(GAUSS_MATCH)
        tag = classify_scenario(scenario.model, scenario.true_dist, tol=1e-6, init=(0.0,))
        self.assertEqual(tag, ScenarioTag.PARAMETRIZABLE_REGULAR)

    def test_wide_truth_is_nonparametrizable(self):
        """KL(N(0,2) || N(0,1)) = (2 - 1 - log 2)/2 ~ 0.1534 > tol."""
        scenario = get_scenario(GAUSS_WIDE)
        tag = classify_scenario(scenario.model, scenario.true_dist, tol=1e-6)
        self.assertEqual(tag, ScenarioTag.NONPARAMETRIZABLE_REGULAR)

    def test_laplace_truth_is_nonparametrizable(self):
        scenario = get_scenario(GAUSS_SCALE_LAPLACE)
        tag = classify_scenario(scenario.model, scenario.true_dist, init=scenario.init)
        self.assertEqual(tag, ScenarioTag.NONPARAMETRIZABLE_REGULAR)

    def test_flat_loss_is_singular(self):
        """A model whose log density ignores w has J = 0."""

        @dataclass(frozen=True)
        class Flat(GaussianLocation):
            def log_density(self, x, w):
                x = np.asarray(x, dtype=float)
                return -0.5 * LOG_2PI - 0.5 * x**2 + 0.0 * np.asarray(w, dtype=float)[..., 0:1]

            def grad_w(self, x, w):
                return np.zeros((np.asarray(x).size, 1))

            def hess_w(self, x, w):
                return np.zeros((np.asarray(x).size, 1, 1))

        truth = gaussian_truth("normal", 1.0)
        optimal = OptimalPoint(
            w0=np.zeros(1), L_at_w0=truth.entropy(), grad_norm=0.0, newton_iterations=0
        )
        # every start is stationary on a flat loss, so skip the uniqueness search
        with patch("scenarios.catalog.find_optimal_parameter", return_value=optimal):
            with self.assertRaises(SingularScenario) as ctx:
                classify_scenario(Flat(id="flat"), truth)
        self.assertEqual(ctx.exception.code, "singular_detected")


# =============================================================================
# Models
# =============================================================================


class GaussianLocationTests(ModelPropertyMixin, SimpleTestCase):
    model = GaussianLocation()
    normalization_grid = [(-20.0,), (-7.5,), (0.0,), (12.0,), (20.0,)]

    def test_log_density_closed_form(self):
        expected = -0.5 * math.log(2 * math.pi) - 0.5 * (X - 0.4) ** 2
        np.testing.assert_allclose(self.model.log_density(X, np.array([0.4])), expected)

    def test_stacked_parameters_give_one_row_per_node(self):
        nodes = np.array([[0.0], [1.0], [-1.0]])
        values = self.model.log_density(X, nodes)
        self.assertEqual(values.shape, (3, X.size))
        np.testing.assert_allclose(values[1], self.model.log_density(X, np.array([1.0])))

    def test_derivatives_match_finite_differences(self):
        self.assertLess(gradient_error(self.model, X, np.array([0.3])), 1e-6)
        self.assertLess(hessian_error(self.model, X, np.array([0.3])), 1e-6)

    def test_density_normalised(self):
        self.assertLess(normalization_error(self.model, np.array([1.5])), 1e-9)

    def test_contains(self):
        self.assertTrue(self.model.contains([19.0]))
        self.assertFalse(self.model.contains([21.0]))


class GaussianLocationScaleTests(ModelPropertyMixin, SimpleTestCase):
    model = GaussianLocationScale()
    w = np.array([0.2, 0.5 * math.log(2.0)])
    normalization_grid = [
        (w1, w2) for w1 in (-20.0, 0.0, 20.0) for w2 in (-20.0, -5.0, 0.0, 5.0, 20.0)
    ]

    def test_log_density_closed_form(self):
        sd = math.sqrt(2.0)
        expected = -0.5 * math.log(2 * math.pi) - math.log(sd) - 0.5 * ((X - 0.2) / sd) ** 2
        np.testing.assert_allclose(self.model.log_density(X, self.w), expected)

    def test_derivatives_match_finite_differences(self):
        self.assertLess(gradient_error(self.model, X, self.w), 1e-6)
        self.assertLess(hessian_error(self.model, X, self.w), 1e-6)

    def test_density_normalised(self):
        self.assertLess(normalization_error(self.model, self.w), 1e-9)


class PriorTests(SimpleTestCase):
    def test_truncated_prior_is_normalised_on_its_box(self):
        prior = GaussianPrior(box=GaussianLocation().box)
        self.assertLess(prior_normalization_error(prior), 1e-8)

    def test_log_density_outside_box_is_minus_infinity(self):
        prior = GaussianPrior(box=GaussianLocation().box)
        self.assertEqual(prior.log_density(np.array([25.0])), -math.inf)

    def test_log_density_gradient_and_hessian(self):
        prior = GaussianPrior(box=GaussianLocationScale().box)
        w = np.array([1.0, -2.0])
        step = 1e-5
        numeric = [
            (prior.log_density(w + step * e) - prior.log_density(w - step * e)) / (2 * step)
            for e in np.eye(2)
        ]
        np.testing.assert_allclose(prior.grad_log_density(w), numeric, atol=1e-8)
        np.testing.assert_allclose(prior.hess_log_density(w), -np.eye(2) / 100.0)

    def test_stacked_log_density(self):
        prior = GaussianPrior(box=GaussianLocationScale().box)
        nodes = np.array([[0.0, 0.0], [1.0, 2.0]])
        values = prior.log_density(nodes)
        self.assertEqual(values.shape, (2,))
        self.assertAlmostEqual(float(values[1]), float(prior.log_density(nodes[1])))


# =============================================================================
# True distributions
# =============================================================================


class TrueDistributionTests(SimpleTestCase):
    def test_sample_moments_match_analytic_moments(self):
        for scenario in builtin_scenarios().values():
            with self.subTest(scenario=scenario.id):
                checks = true_density_checks(scenario.true_dist, make_rng(7), count=1_000_000)
                self.assertLess(checks["normalization_error"], 1e-9)
                self.assertLess(abs(checks["mean_z"]), 4.0)
                self.assertLess(abs(checks["variance_z"]), 4.0)

    def test_entropy_of_gaussian(self):
        truth = gaussian_truth("normal-var2", 2.0)
        self.assertAlmostEqual(truth.entropy(), 0.5 * math.log(2 * math.pi * math.e * 2.0), places=9)

    def test_entropy_of_laplace(self):
        truth = get_scenario(GAUSS_SCALE_LAPLACE).true_dist
        self.assertAlmostEqual(truth.entropy(), 1.0 + math.log(2.0), places=9)

    def test_quadrature_rule_reproduces_moments(self):
        truth = get_scenario(GAUSS_SCALE_LAPLACE).true_dist
        nodes, weights = truth.quadrature_rule(panels=24, order=20)
        self.assertAlmostEqual(float(weights.sum()), 1.0, places=10)
        self.assertAlmostEqual(float(weights @ nodes), 0.0, places=10)
        self.assertAlmostEqual(float(weights @ nodes**2), 2.0, places=9)
        self.assertAlmostEqual(float(weights @ nodes**4), 24.0, places=7)

    def test_sampling_is_seeded(self):
        truth = get_scenario(GAUSS_WIDE).true_dist
        np.testing.assert_array_equal(truth.sample(make_rng(3), 10), truth.sample(make_rng(3), 10))
