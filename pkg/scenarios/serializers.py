"""
Scenario Serializers.

Read-only representations of catalog entries and their population geometry.
"""

from rest_framework import serializers


# =============================================================================
# Scenario Serializers
# =============================================================================


class TrueDistributionSerializer(serializers.Serializer):
    id = serializers.CharField()
    support = serializers.ListField(child=serializers.FloatField())
    mean = serializers.FloatField()
    variance = serializers.FloatField()


class ScenarioListSerializer(serializers.Serializer):
    """Lightweight serializer for the scenario list."""

    id = serializers.CharField()
    label = serializers.CharField()
    tag = serializers.CharField()
    d = serializers.IntegerField()


class ScenarioDetailSerializer(ScenarioListSerializer):
    model = serializers.CharField(source="model.id")
    param_box = serializers.SerializerMethodField()
    true_dist = TrueDistributionSerializer()
    prior = serializers.SerializerMethodField()

    def get_param_box(self, obj):
        return obj.model.param_box.tolist()

    def get_prior(self, obj):
        return {"family": "truncated-normal", "mean": obj.prior.mean, "scale": obj.prior.scale}


# =============================================================================
# Geometry Serializers
# =============================================================================


class ScenarioConstantsSerializer(serializers.Serializer):
    """w0, I, J, Q and the asymptotic constants of one scenario."""

    scenario = serializers.CharField(source="scenario_id")
    w0 = serializers.SerializerMethodField()
    L_at_w0 = serializers.FloatField(source="optimal.L_at_w0")
    entropy = serializers.FloatField()
    I = serializers.SerializerMethodField()  # noqa: E741
    J = serializers.SerializerMethodField()
    Q = serializers.SerializerMethodField()
    S = serializers.FloatField(source="constants.S")
    # "lambda" is a keyword, so the field is declared in __init__ below
    nu = serializers.FloatField(source="constants.nu")
    mu = serializers.FloatField(source="constants.mu")
    tic = serializers.FloatField(source="constants.tic")

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.fields["lambda"] = serializers.FloatField(source="constants.lambda_")

    def get_w0(self, obj):
        return obj.optimal.w0.tolist()

    def get_I(self, obj):
        return obj.pair.I.tolist()

    def get_J(self, obj):
        return obj.pair.J.tolist()

    def get_Q(self, obj):
        return obj.pair.Q.tolist()
