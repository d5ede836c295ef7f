"""Geometry app configuration."""

from django.apps import AppConfig


class GeometryConfig(AppConfig):
    """Configuration for the geometry app."""

    name = "geometry"
    verbose_name = "Population Geometry"
