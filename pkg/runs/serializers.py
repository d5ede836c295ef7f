"""
Serializers for experiment configuration.

Config files are parsed into plain strings by ``runs.config_loader`` and
validated here, so every invariant of ``ExperimentConfig`` is stated once.
"""

import math

from django.conf import settings
from django.utils.translation import gettext_lazy as _
from rest_framework import serializers

from config.exceptions import UnknownScenario
from experiments.models import (
    DEFAULT_BETA_GRID,
    DEFAULT_N_GRID,
    DEFAULT_REPLICATIONS,
    DEFAULT_SE_MULTIPLIER,
    ExperimentConfig,
)
from posterior.models import BackendKind, GridSpec, MetropolisSpec, PosteriorBackend
from scenarios.catalog import get_scenario

MIN_REPLICATIONS = 100
MIN_GRID_NODES = 201
# each n must be at least this multiple of the parameter dimension
SAMPLES_PER_PARAMETER = 10


class BetaField(serializers.Field):
    """A positive inverse temperature; ``inf`` selects the plug-in."""

    default_error_messages = {
        "invalid": _("A positive number or 'inf' is required."),
        "not_positive": _("Inverse temperatures must be positive."),
    }

    def to_internal_value(self, data):
        try:
            value = float(str(data).strip())
        except ValueError:
            self.fail("invalid")
        if math.isnan(value):
            self.fail("invalid")
        if value <= 0:
            self.fail("not_positive")
        return value

    def to_representation(self, value):
        return "inf" if math.isinf(value) else value


class ExperimentConfigSerializer(serializers.Serializer):
    """
    Validates a replication-study configuration and builds an
    ``ExperimentConfig`` on ``save()``.
    """

    scenario = serializers.CharField()
    n_grid = serializers.ListField(
        child=serializers.IntegerField(min_value=1), allow_empty=False, default=list(DEFAULT_N_GRID)
    )
    beta_grid = serializers.ListField(
        child=BetaField(), allow_empty=False, default=list(DEFAULT_BETA_GRID)
    )
    replications = serializers.IntegerField(default=DEFAULT_REPLICATIONS)
    master_seed = serializers.IntegerField(min_value=0, max_value=2**64 - 1, required=False)
    backend = serializers.ChoiceField(choices=BackendKind.choices, default=BackendKind.GRID)
    tolerance_se_multiplier = serializers.FloatField(default=DEFAULT_SE_MULTIPLIER)

    grid_nodes = serializers.IntegerField(default=GridSpec.nodes_per_dim)
    grid_span = serializers.FloatField(default=GridSpec.span)
    mh_chains = serializers.IntegerField(default=MetropolisSpec.chains)
    mh_steps = serializers.IntegerField(default=MetropolisSpec.steps)
    mh_burn_in = serializers.IntegerField(default=MetropolisSpec.burn_in)
    mh_proposal_scale = serializers.FloatField(default=MetropolisSpec.proposal_scale)

    def validate_scenario(self, scenario_id):
        try:
            get_scenario(scenario_id)
        except UnknownScenario as exc:
            raise serializers.ValidationError(exc.detail)
        return scenario_id

    def validate_n_grid(self, n_grid):
        if any(later <= earlier for earlier, later in zip(n_grid, n_grid[1:])):
            raise serializers.ValidationError(_("n_grid strictly increasing"))
        return n_grid

    def validate_beta_grid(self, beta_grid):
        if len(set(beta_grid)) != len(beta_grid):
            raise serializers.ValidationError(_("beta_grid values distinct"))
        return beta_grid

    def validate_replications(self, replications):
        if replications < MIN_REPLICATIONS:
            raise serializers.ValidationError(_("R ≥ %(min)d") % {"min": MIN_REPLICATIONS})
        return replications

    def validate_tolerance_se_multiplier(self, multiplier):
        if not multiplier > 0:
            raise serializers.ValidationError(_("tolerance_se_multiplier > 0"))
        return multiplier

    def validate_grid_nodes(self, nodes):
        if nodes < MIN_GRID_NODES:
            raise serializers.ValidationError(
                _("grid_nodes ≥ %(min)d") % {"min": MIN_GRID_NODES}
            )
        return nodes

    def validate_grid_span(self, span):
        if not span > 0:
            raise serializers.ValidationError(_("grid_span > 0"))
        return span

    def validate_mh_chains(self, chains):
        if chains < 2:
            raise serializers.ValidationError(_("mh_chains ≥ 2"))
        return chains

    def validate_mh_steps(self, steps):
        if steps < 2:
            raise serializers.ValidationError(_("mh_steps ≥ 2"))
        return steps

    def validate_mh_burn_in(self, burn_in):
        if burn_in < 0:
            raise serializers.ValidationError(_("mh_burn_in ≥ 0"))
        return burn_in

    def validate_mh_proposal_scale(self, scale):
        if not scale > 0:
            raise serializers.ValidationError(_("mh_proposal_scale > 0"))
        return scale

    def validate(self, data):
        d = get_scenario(data["scenario"]).d
        if data["n_grid"][0] < SAMPLES_PER_PARAMETER * d:
            raise serializers.ValidationError(
                {"n_grid": _("n ≥ 10·d (d = %(d)d)") % {"d": d}}
            )
        return data

    def create(self, validated_data):
        backend = PosteriorBackend(
            kind=validated_data["backend"],
            grid=GridSpec(
                nodes_per_dim=validated_data["grid_nodes"],
                span=validated_data["grid_span"],
            ),
            metropolis=MetropolisSpec(
                chains=validated_data["mh_chains"],
                steps=validated_data["mh_steps"],
                burn_in=validated_data["mh_burn_in"],
                proposal_scale=validated_data["mh_proposal_scale"],
            ),
        )
        return ExperimentConfig(
            scenario_id=validated_data["scenario"],
            n_grid=tuple(validated_data["n_grid"]),
            beta_grid=tuple(validated_data["beta_grid"]),
            replications=validated_data["replications"],
            master_seed=validated_data.get("master_seed", settings.EOS_DEFAULT_MASTER_SEED),
            backend=backend,
            tolerance_se_multiplier=validated_data["tolerance_se_multiplier"],
        )
