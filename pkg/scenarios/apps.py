"""Scenarios app configuration."""

from django.apps import AppConfig


class ScenariosConfig(AppConfig):
    """Configuration for the scenarios app."""

    default_auto_field = "django.db.models.BigAutoField"
    name = "scenarios"
    verbose_name = "Scenarios"
