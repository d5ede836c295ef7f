"""
API tests for the read-only scenario endpoints.

Run with:
    python -m pytest scenarios/tests/test_api.py -v
"""

from unittest.mock import patch

from django.core.cache import cache
from rest_framework import status
from rest_framework.test import APISimpleTestCase

from config.exceptions import SingularInformation

LIST_URL = "/api/v1/scenarios/"


def detail_url(scenario_id):
    return f"{LIST_URL}{scenario_id}/"


def constants_url(scenario_id):
    return f"{LIST_URL}{scenario_id}/constants/"


class HealthCheckTests(APISimpleTestCase):
    def test_health(self):
        for url in ("/", "/health/"):
            response = self.client.get(url)
            self.assertEqual(response.status_code, status.HTTP_200_OK)
            self.assertEqual(response.json(), {"status": "healthy"})


class ScenarioListTests(APISimpleTestCase):
    def test_list_returns_every_builtin_scenario(self):
        response = self.client.get(LIST_URL)
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        ids = [item["id"] for item in response.data]
        self.assertEqual(ids, ["gauss-match", "gauss-wide", "gauss-narrow", "gaussscale-laplace"])
        self.assertEqual(set(response.data[0]), {"id", "label", "tag", "d"})

    def test_list_is_cached(self):
        first = self.client.get(LIST_URL)
        with patch("scenarios.views.builtin_scenarios") as catalog:
            second = self.client.get(LIST_URL)
        catalog.assert_not_called()
        self.assertEqual(first.data, second.data)


class ScenarioRetrieveTests(APISimpleTestCase):
    def test_retrieve_laplace_scenario(self):
        response = self.client.get(detail_url("gaussscale-laplace"))
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        self.assertEqual(response.data["model"], "gauss-loc-scale")
        self.assertEqual(response.data["d"], 2)
        self.assertEqual(response.data["tag"], "nonparametrizable_regular")
        self.assertAlmostEqual(response.data["true_dist"]["variance"], 2.0)
        self.assertEqual(response.data["param_box"], [[-20.0, 20.0], [-20.0, 20.0]])
        self.assertEqual(response.data["prior"]["scale"], 10.0)

    def test_unknown_scenario_is_404(self):
        response = self.client.get(detail_url("gauss-nope"))
        self.assertEqual(response.status_code, status.HTTP_404_NOT_FOUND)


class ScenarioConstantsTests(APISimpleTestCase):
    def test_gauss_wide_constants(self):
        """q = N(0, 2), p = N(w, 1): I = 2, J = 1, so TIC = 2."""
        response = self.client.get(constants_url("gauss-wide"))
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        data = response.data
        self.assertEqual(
            set(data),
            {"scenario", "w0", "L_at_w0", "entropy", "I", "J", "Q", "S", "lambda", "nu", "mu", "tic"},
        )
        self.assertAlmostEqual(data["w0"][0], 0.0, places=8)
        self.assertAlmostEqual(data["S"], 1.918939, places=6)
        self.assertAlmostEqual(data["I"][0][0], 2.0, places=8)
        self.assertAlmostEqual(data["J"][0][0], 1.0, places=8)
        self.assertAlmostEqual(data["Q"][0][0], 1.0, places=8)
        self.assertAlmostEqual(data["lambda"], 0.5)
        self.assertAlmostEqual(data["nu"], 1.0, places=8)
        self.assertAlmostEqual(data["mu"], 2.0, places=8)
        self.assertAlmostEqual(data["tic"], 2.0, places=8)

    def test_unknown_scenario_is_404(self):
        response = self.client.get(constants_url("gauss-nope"))
        self.assertEqual(response.status_code, status.HTTP_404_NOT_FOUND)

    def test_singular_geometry_is_409(self):
        error = SingularInformation("smallest eigenvalue of J is 0.000e+00")
        with patch("scenarios.views.scenario_geometry", side_effect=error):
            response = self.client.get(constants_url("gauss-match"))
        self.assertEqual(response.status_code, status.HTTP_409_CONFLICT)
        self.assertEqual(response.data["code"], "singular_J")
        self.assertIn("eigenvalue", response.data["error"])

    def test_failed_geometry_is_not_cached(self):
        with patch("scenarios.views.scenario_geometry", side_effect=SingularInformation()):
            self.client.get(constants_url("gauss-match"))
        self.assertIsNone(cache.get("scenario_list:retrieve:gauss-match:constants"))
