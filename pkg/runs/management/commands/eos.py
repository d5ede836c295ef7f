"""
Equations-of-state laboratory command.

Usage:
    eos constants --scenario gauss-wide [--fresh]
    eos replicate --config study.conf --out runs/wide [--seed N] [--workers N]
    eos verify --in runs/wide [--against runs/wide-grid]
    eos sweep-beta --config sweep.conf [--out runs/sweep]

``eos`` is the root script; ``python manage.py eos ...`` is equivalent.
Exit status is 0 when every check passes or reports insufficient
precision, 1 on any hard failure, 2 when J(w0) is singular.
"""

import json
import math
from dataclasses import replace
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from config.cache_utils import invalidate_all_caches
from config.exceptions import InvalidInput, LabError, SingularInformation, SingularScenario
from experiments.aggregation import aggregate
from experiments.models import CheckStatus
from experiments.replication import run_replications
from experiments.sweep import beta_sweep
from experiments.verification import verify_all, verify_backend_agreement
from geometry.services import scenario_geometry
from runs.config_loader import load_config, load_config_text, serialize_config
from runs.persistence import (
    ROWS_FILE,
    RunManifest,
    emit_results,
    read_manifest,
    read_rows,
    write_manifest,
    write_sweep,
    write_verdicts,
)
from scenarios.catalog import get_scenario

SINGULAR_EXIT = 2
FAILURE_EXIT = 1


class Command(BaseCommand):
    help = "Compute constants, run replication studies and verify the equations of state"

    def add_arguments(self, parser):
        subparsers = parser.add_subparsers(dest="subcommand", required=True)

        constants = subparsers.add_parser("constants", help="Print w0, I, J and S, lambda, nu, mu, TIC")
        constants.add_argument("--scenario", required=True, help="Scenario id (e.g. gauss-wide)")
        constants.add_argument("--fresh", action="store_true", help="Recompute instead of using the cache")

        replicate = subparsers.add_parser("replicate", help="Run a replication study")
        replicate.add_argument("--config", required=True, help="Experiment config file")
        replicate.add_argument("--out", required=True, help="Output directory")
        replicate.add_argument("--seed", type=int, help="Override master_seed")
        replicate.add_argument("--workers", type=int, help="Worker processes (default EOS_WORKERS)")
        replicate.add_argument("--fresh", action="store_true", help="Recompute scenario constants")

        verify = subparsers.add_parser("verify", help="Run every verification suite on a run directory")
        verify.add_argument("--in", dest="in_dir", required=True, help="Run directory from 'replicate'")
        verify.add_argument(
            "--against",
            help="Run directory of the same study with the other posterior backend",
        )

        sweep = subparsers.add_parser("sweep-beta", help="Tabulate E[B_g] against 1/beta")
        sweep.add_argument("--config", required=True, help="Experiment config file")
        sweep.add_argument("--out", default=".", help="Output directory (default: current)")
        sweep.add_argument("--seed", type=int, help="Override master_seed")
        sweep.add_argument("--workers", type=int, help="Worker processes (default EOS_WORKERS)")

    def handle(self, *args, **options):
        if options.get("fresh"):
            invalidate_all_caches()
        handler = {
            "constants": self.handle_constants,
            "replicate": self.handle_replicate,
            "verify": self.handle_verify,
            "sweep-beta": self.handle_sweep,
        }[options["subcommand"]]
        try:
            handler(options)
        except (SingularInformation, SingularScenario) as exc:
            raise CommandError(str(exc), returncode=SINGULAR_EXIT)
        except LabError as exc:
            raise CommandError(str(exc))

    # =========================================================================
    # Subcommands
    # =========================================================================

    def handle_constants(self, options):
        geometry = scenario_geometry(get_scenario(options["scenario"]), fresh=options["fresh"])
        payload = geometry.as_dict()
        self.stdout.write(json.dumps(payload, indent=2, default=float))

    def handle_replicate(self, options):
        config = load_config(options["config"])
        if options.get("seed") is not None:
            config = replace(config, master_seed=options["seed"])
        out_dir = Path(options["out"])
        geometry = scenario_geometry(get_scenario(config.scenario_id), fresh=options["fresh"])

        write_manifest(RunManifest.build(serialize_config(config), geometry), out_dir)
        rows = run_replications(config, geometry.w0, workers=options.get("workers"))
        report = aggregate(rows, geometry.constants.S, config.scenario_id, geometry.constants.d)
        emit_results(rows, report, None, out_dir, d=geometry.constants.d)

        failed = sum(cell.failed for cell in report.cells.values())
        self.stdout.write(
            self.style.SUCCESS(f"{len(rows)} rows ({failed} flagged) written to {out_dir}")
        )

    def handle_verify(self, options):
        in_dir = Path(options["in_dir"])
        manifest = read_manifest(in_dir)
        config = load_config_text(manifest.config_text)
        geometry = scenario_geometry(get_scenario(config.scenario_id))
        for name in ("S", "nu", "mu", "tic"):
            recorded = manifest.constants[name]
            current = getattr(geometry.constants, name)
            if not math.isclose(float(recorded), current, rel_tol=1e-9, abs_tol=1e-12):
                self.stderr.write(
                    self.style.WARNING(f"{name} differs from the manifest: {recorded} vs {current}")
                )

        rows = read_rows(in_dir / ROWS_FILE)
        report = aggregate(rows, geometry.constants.S, config.scenario_id, geometry.constants.d)
        verdicts = verify_all(rows, report, geometry, config.tolerance_se_multiplier)
        if options.get("against"):
            verdicts += self._backend_agreement(config, rows, Path(options["against"]))
        path = write_verdicts(verdicts, in_dir)
        self._report(verdicts, path)

    def handle_sweep(self, options):
        config = load_config(options["config"])
        if options.get("seed") is not None:
            config = replace(config, master_seed=options["seed"])
        points, checks = beta_sweep(config, workers=options.get("workers"))
        path = write_sweep(points, options["out"])
        self._report(checks, path)

    def _backend_agreement(self, config, rows, other_dir):
        other = load_config_text(read_manifest(other_dir).config_text)
        if (other.scenario_id, other.master_seed) != (config.scenario_id, config.master_seed):
            raise InvalidInput(
                f"{other_dir} is not the same study: scenario and master_seed must match"
            )
        if other.backend.kind == config.backend.kind:
            raise InvalidInput(f"{other_dir} used the same backend ({config.backend.kind})")
        other_rows = read_rows(other_dir / ROWS_FILE)
        return verify_backend_agreement(other_rows, rows, config.tolerance_se_multiplier)

    def _report(self, verdicts, path):
        for verdict in verdicts:
            line = (
                f"{str(verdict.status):<22} {verdict.name}: observed {verdict.observed:.6g}, "
                f"predicted {verdict.predicted:.6g}, se {verdict.se:.3g}"
            )
            if verdict.status == CheckStatus.FAIL:
                self.stdout.write(self.style.ERROR(line))
            elif verdict.status == CheckStatus.INSUFFICIENT_PRECISION:
                self.stdout.write(self.style.WARNING(line))
            else:
                self.stdout.write(line)

        failures = [verdict.name for verdict in verdicts if verdict.is_hard_failure]
        self.stdout.write(f"Wrote {len(verdicts)} checks to {path}")
        if failures:
            raise CommandError(
                f"{len(failures)} check(s) failed: {', '.join(failures)}", returncode=FAILURE_EXIT
            )
        self.stdout.write(self.style.SUCCESS("All checks passed or need more replications"))
