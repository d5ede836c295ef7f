"""Functionals app configuration."""

from django.apps import AppConfig


class FunctionalsConfig(AppConfig):
    name = "functionals"
    verbose_name = "Loss Functionals"
