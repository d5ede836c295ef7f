"""Posterior app configuration."""

from django.apps import AppConfig


class PosteriorConfig(AppConfig):
    name = "posterior"
    verbose_name = "Tempered Posteriors"
