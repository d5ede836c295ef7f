"""
Experiment configuration files.

Flat ``key = value`` text, one setting per line. ``#`` starts a comment,
list values are comma-separated and ``inf`` is accepted in ``beta_grid``:

    scenario = gauss-wide
    n_grid = 100, 400, 1600
    beta_grid = 0.5, 1, 2, inf
    replications = 10000
"""

import logging
from pathlib import Path

from config.exceptions import ConfigParseError, ConfigValidationError, ResultIOError
from config.utils.seeding import canonical_beta

from .serializers import ExperimentConfigSerializer

logger = logging.getLogger(__name__)

LIST_KEYS = ("n_grid", "beta_grid")
KEY_ALIASES = {"R": "replications", "seed": "master_seed"}
# canonical key order; serialize_config writes exactly these
CONFIG_KEYS = (
    "scenario",
    "n_grid",
    "beta_grid",
    "replications",
    "master_seed",
    "backend",
    "tolerance_se_multiplier",
    "grid_nodes",
    "grid_span",
    "mh_chains",
    "mh_steps",
    "mh_burn_in",
    "mh_proposal_scale",
)


def parse_config_text(text):
    """
    Split config text into raw values.

    Raises:
        ConfigParseError: malformed line, unknown or repeated key.
    """
    values = {}
    for number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigParseError(f"expected 'key = value', got {raw_line.strip()!r}", line=number)
        key = KEY_ALIASES.get(key, key)
        if key not in CONFIG_KEYS:
            raise ConfigParseError(f"unknown key {key!r}", line=number)
        if key in values:
            raise ConfigParseError(f"{key!r} given twice", line=number)
        if not value:
            raise ConfigParseError(f"empty value for {key!r}", line=number)
        if key in LIST_KEYS:
            items = [item.strip() for item in value.split(",")]
            if any(not item for item in items):
                raise ConfigParseError(f"empty item in {key!r}", line=number)
            value = items
        values[key] = value
    return values


def _describe(errors):
    """Flatten DRF error details into 'field: message' text."""
    parts = []
    for name, messages in errors.items():
        if isinstance(messages, dict):
            messages = [str(message) for nested in messages.values() for message in nested]
        parts.append(f"{name}: {'; '.join(str(message) for message in messages)}")
    return ", ".join(parts)


def config_from_values(values):
    """
    Validate raw values and build the ExperimentConfig.

    Raises:
        ConfigValidationError: names the violated invariant.
    """
    serializer = ExperimentConfigSerializer(data=values)
    if not serializer.is_valid():
        raise ConfigValidationError(_describe(serializer.errors))
    return serializer.save()


def load_config_text(text):
    return config_from_values(parse_config_text(text))


def load_config(path):
    """
    Read, parse and validate an experiment configuration file.

    Raises:
        ResultIOError: the file cannot be read.
        ConfigParseError, ConfigValidationError
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ResultIOError(f"cannot read {path}: {exc}")
    config = load_config_text(text)
    logger.info(
        "Loaded %s: scenario=%s n=%s beta=%s R=%d",
        path,
        config.scenario_id,
        list(config.n_grid),
        [canonical_beta(beta) for beta in config.beta_grid],
        config.replications,
    )
    return config


def _number(value):
    return format(float(value), ".17g")


def serialize_config(config):
    """
    Canonical text of a config: every key, fixed order, 17 significant
    digits for reals. ``load_config_text(serialize_config(c)) == c``.
    """
    backend = config.backend
    values = {
        "scenario": config.scenario_id,
        "n_grid": ", ".join(str(int(n)) for n in config.n_grid),
        "beta_grid": ", ".join(canonical_beta(beta) for beta in config.beta_grid),
        "replications": str(config.replications),
        "master_seed": str(config.master_seed),
        "backend": str(backend.kind),
        "tolerance_se_multiplier": _number(config.tolerance_se_multiplier),
        "grid_nodes": str(backend.grid.nodes_per_dim),
        "grid_span": _number(backend.grid.span),
        "mh_chains": str(backend.metropolis.chains),
        "mh_steps": str(backend.metropolis.steps),
        "mh_burn_in": str(backend.metropolis.burn_in),
        "mh_proposal_scale": _number(backend.metropolis.proposal_scale),
    }
    return "".join(f"{key} = {values[key]}\n" for key in CONFIG_KEYS)
