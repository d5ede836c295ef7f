"""Runs app configuration."""

from django.apps import AppConfig


class RunsConfig(AppConfig):
    """Configuration for the runs app (config files, results, CLI)."""

    name = "runs"
    verbose_name = "Runs"
