"""Experiments app configuration."""

from django.apps import AppConfig


class ExperimentsConfig(AppConfig):
    """Configuration for the experiments app."""

    name = "experiments"
    verbose_name = "Replication Experiments"
