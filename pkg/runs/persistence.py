"""
Result files of a run directory.

    manifest.json   written first; config hash, version, constants, RNG id
    rows.csv        one row per replication, schema from functionals.schema
    aggregate.json  per-(n, beta) means and standard errors, keyed "n,beta"
    verdicts.json   one record per verification check
    beta_sweep.csv  E[B_g] against 1/beta

Floats are written with 17 significant digits (CSV) or as the shortest
round-tripping repr (JSON); non-finite values are the strings "nan",
"inf" and "-inf". Every file is written to a temporary sibling and renamed
into place.
"""

import csv
import hashlib
import io
import json
import logging
import math
import os
import tempfile
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

from config import __version__
from config.exceptions import ResultIOError
from config.utils.seeding import RNG_ALGORITHM, canonical_beta
from experiments.models import AggregateCell, AggregateReport
from experiments.sweep import SWEEP_FIELDS
from functionals.schema import KEY_FIELDS, row_fields

logger = logging.getLogger(__name__)

MANIFEST_FILE = "manifest.json"
ROWS_FILE = "rows.csv"
AGGREGATE_FILE = "aggregate.json"
VERDICTS_FILE = "verdicts.json"
SWEEP_FILE = "beta_sweep.csv"

INTEGER_KEYS = ("n", "replication", "seed")


def format_float(value):
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return format(value, ".17g")


def _jsonable(value):
    if isinstance(value, dict):
        return {str(key): _jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(item) for item in value]
    if isinstance(value, float) and not math.isfinite(value):
        return format_float(value)
    if hasattr(value, "tolist"):
        return _jsonable(value.tolist())
    return value


def _json_text(payload):
    return json.dumps(_jsonable(payload), indent=2, allow_nan=False, ensure_ascii=False) + "\n"


def write_atomic(path, text):
    """
    Write ``text`` to ``path`` via a temporary file in the same directory.

    Raises:
        ResultIOError: the directory is not writable.
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, temp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
                handle.write(text)
            os.replace(temp, path)
        except BaseException:
            if os.path.exists(temp):
                os.unlink(temp)
            raise
    except OSError as exc:
        raise ResultIOError(f"cannot write {path}: {exc}")
    logger.debug("Wrote %s (%d bytes)", path, len(text))


def _read(path):
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ResultIOError(f"cannot read {path}: {exc}")


# =============================================================================
# Manifest
# =============================================================================


def config_hash(config_text):
    return hashlib.sha256(config_text.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class RunManifest:
    config_hash: str
    version: str
    created_at: str
    scenario_id: str
    constants: dict
    rng_algorithm: str
    config_text: str

    @classmethod
    def build(cls, config_text, geometry):
        return cls(
            config_hash=config_hash(config_text),
            version=__version__,
            created_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
            scenario_id=geometry.scenario_id,
            constants=geometry.constants.as_dict(),
            rng_algorithm=RNG_ALGORITHM,
            config_text=config_text,
        )

    def as_dict(self):
        return asdict(self)


def write_manifest(manifest, out_dir):
    write_atomic(Path(out_dir) / MANIFEST_FILE, _json_text(manifest.as_dict()))


def read_manifest(in_dir):
    path = Path(in_dir) / MANIFEST_FILE
    try:
        payload = json.loads(_read(path))
        manifest = RunManifest(**payload)
    except (ValueError, TypeError) as exc:
        raise ResultIOError(f"malformed manifest {path}: {exc}")
    if config_hash(manifest.config_text) != manifest.config_hash:
        raise ResultIOError(f"{path}: config text does not match its hash")
    return manifest


# =============================================================================
# Rows
# =============================================================================


def rows_csv_text(rows, d):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    fields = row_fields(d)
    writer.writerow(fields)
    for row in rows:
        writer.writerow(
            [
                row[name]
                if name in KEY_FIELDS and name != "beta"
                else format_float(row[name])
                for name in fields
            ]
        )
    return buffer.getvalue()


def _parse_cell(name, text):
    if name in INTEGER_KEYS:
        return int(text)
    if name in ("scenario_id", "status"):
        return text
    return float(text)


def read_rows(path):
    """
    Parse rows.csv back into row dicts.

    Raises:
        ResultIOError: unreadable or malformed file.
    """
    reader = csv.DictReader(io.StringIO(_read(path)))
    try:
        return [{name: _parse_cell(name, text) for name, text in record.items()} for record in reader]
    except (TypeError, ValueError) as exc:
        raise ResultIOError(f"malformed rows file {path}: {exc}")


# =============================================================================
# Aggregate, verdicts, sweep
# =============================================================================


def aggregate_key(n, beta):
    return f"{int(n)},{canonical_beta(beta)}"


def aggregate_payload(report):
    return {
        "scenario": report.scenario_id,
        "cells": {
            aggregate_key(cell.n, cell.beta): {
                "count": cell.count,
                "failed": cell.failed,
                "means": cell.means,
                "ses": cell.ses,
            }
            for cell in report.cells.values()
        },
    }


def _restore(values):
    return {name: float(value) for name, value in values.items()}


def read_aggregate(path):
    payload = json.loads(_read(path))
    cells = {}
    for key, cell in payload["cells"].items():
        n_text, beta_text = key.split(",")
        n, beta = int(n_text), float(beta_text)
        cells[(n, beta)] = AggregateCell(
            n=n,
            beta=beta,
            count=cell["count"],
            failed=cell["failed"],
            means=_restore(cell["means"]),
            ses=_restore(cell["ses"]),
        )
    return AggregateReport(scenario_id=payload["scenario"], cells=cells)


def verdicts_payload(verdicts):
    return [verdict.as_dict() for verdict in verdicts]


def sweep_csv_text(points):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(SWEEP_FIELDS)
    for point in points:
        record = point.as_dict()
        writer.writerow(
            [record[name] if name == "n" else format_float(record[name]) for name in SWEEP_FIELDS]
        )
    return buffer.getvalue()


def write_sweep(points, out_dir):
    path = Path(out_dir) / SWEEP_FILE
    write_atomic(path, sweep_csv_text(points))
    return path


def write_verdicts(verdicts, out_dir):
    path = Path(out_dir) / VERDICTS_FILE
    write_atomic(path, _json_text(verdicts_payload(verdicts)))
    return path


def emit_results(rows, aggregate, verdicts, out_dir, d=None):
    """
    Write rows.csv and aggregate.json, plus verdicts.json when ``verdicts``
    is not None. An empty row stream gives a header-only rows.csv.

    Raises:
        ResultIOError
    """
    out_dir = Path(out_dir)
    rows = list(rows)
    if d is None:
        d = sum(1 for name in rows[0] if name.startswith("w_map_")) if rows else 1
    write_atomic(out_dir / ROWS_FILE, rows_csv_text(rows, d))
    if aggregate is None:
        payload = {"scenario": None, "cells": {}}
    else:
        payload = aggregate_payload(aggregate)
    write_atomic(out_dir / AGGREGATE_FILE, _json_text(payload))
    if verdicts is not None:
        write_verdicts(verdicts, out_dir)
    logger.info("Wrote %d rows to %s", len(rows), out_dir)
