"""
Scenario URL Configuration.

All endpoints are public and read-only.
"""

from django.urls import include, path
from rest_framework.routers import DefaultRouter

from .views import ScenarioViewSet

app_name = "scenarios"

router = DefaultRouter()
router.register(r"scenarios", ScenarioViewSet, basename="scenario")

urlpatterns = [
    path("", include(router.urls)),
]
