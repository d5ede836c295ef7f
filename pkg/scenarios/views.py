"""
Scenario Views.

Read-only, public endpoints over the built-in scenario catalog:
list, retrieve, and the population constants of one scenario.
"""

import logging

from django.core.cache import cache
from rest_framework import mixins, status, viewsets
from rest_framework.decorators import action
from rest_framework.exceptions import NotFound
from rest_framework.response import Response

from config.cache_utils import (
    SCENARIO_CACHE_PREFIX,
    CachedListRetrieveMixin,
    build_retrieve_cache_key,
    cache_timeout,
)
from config.exceptions import LabError, SingularInformation, SingularScenario, UnknownScenario
from geometry.services import scenario_geometry

from .catalog import builtin_scenarios, get_scenario
from .serializers import (
    ScenarioConstantsSerializer,
    ScenarioDetailSerializer,
    ScenarioListSerializer,
)

logger = logging.getLogger(__name__)


# =============================================================================
# Scenario Views
# =============================================================================


class ScenarioViewSet(
    CachedListRetrieveMixin,
    mixins.ListModelMixin,
    mixins.RetrieveModelMixin,
    viewsets.GenericViewSet,
):
    """
    ViewSet for the scenario catalog.

    list:      GET /api/v1/scenarios/
    retrieve:  GET /api/v1/scenarios/{id}/
    constants: GET /api/v1/scenarios/{id}/constants/
    """

    CACHE_PREFIX = SCENARIO_CACHE_PREFIX
    lookup_field = "pk"

    def get_queryset(self):
        return list(builtin_scenarios().values())

    def get_serializer_class(self):
        if self.action == "list":
            return ScenarioListSerializer
        if self.action == "constants":
            return ScenarioConstantsSerializer
        return ScenarioDetailSerializer

    def get_object(self):
        try:
            return get_scenario(self.kwargs[self.lookup_field])
        except UnknownScenario as exc:
            raise NotFound(exc.detail) from exc

    @action(detail=True, methods=["get"])
    def constants(self, request, pk=None):
        """w0, I, J, Q and (S, lambda, nu, mu, TIC) for one scenario."""
        scenario = self.get_object()
        cache_key = build_retrieve_cache_key(self.CACHE_PREFIX, f"{scenario.id}:constants")
        cached = cache.get(cache_key)
        if cached is not None:
            return Response(cached)

        try:
            geometry = scenario_geometry(scenario)
        except (SingularInformation, SingularScenario) as exc:
            return Response(
                {"error": exc.detail, "code": exc.code},
                status=status.HTTP_409_CONFLICT,
            )
        except LabError as exc:
            logger.error("Geometry failed for %s: %s", scenario.id, exc)
            return Response(
                {"error": exc.detail, "code": exc.code},
                status=status.HTTP_500_INTERNAL_SERVER_ERROR,
            )

        data = self.get_serializer(geometry).data
        cache.set(cache_key, data, cache_timeout())
        return Response(data)
