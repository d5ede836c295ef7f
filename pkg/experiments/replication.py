"""
Replication runner.

Every (n, beta, replication) triple is an independent work item. Items are
dispatched to a process pool with ``executor.map`` so rows come back in
submission order; combined with per-row seeds this makes the output
independent of the worker count.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import django
from django.conf import settings

from config.exceptions import LabError, ReplicationAborted
from config.utils.seeding import derive_seed
from functionals.losses import loss_report
from functionals.schema import STATUS_OK, build_row, failed_row
from geometry.services import scenario_geometry
from posterior.engine import posterior_moments
from posterior.models import PosteriorBackend, TemperedPosterior, TrainingSet
from scenarios.catalog import get_scenario

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class WorkItem:
    scenario_id: str
    n: int
    beta: float
    replication: int
    seed: int
    backend: PosteriorBackend
    w0: tuple
    panels: int
    order: int


# =============================================================================
# MULTIPROCESSING WORKER (module-level for pickling)
# =============================================================================


def _init_worker():
    django.setup()


def replicate_one(item):
    """
    Compute one row. Laboratory errors become a flagged row carrying the
    error code; anything else propagates.
    """
    scenario = get_scenario(item.scenario_id)
    try:
        data = TrainingSet.generate(scenario, item.n, item.seed)
        posterior = TemperedPosterior(
            model=scenario.model,
            prior=scenario.prior,
            training_set=data,
            beta=item.beta,
            backend=item.backend,
            start=item.w0,
        )
        rule = scenario.true_dist.quadrature_rule(panels=item.panels, order=item.order)
        report, terms = loss_report(posterior, scenario.true_dist, item.w0, rule=rule)
        moments = posterior_moments(posterior, item.w0)
    except LabError as exc:
        logger.warning(
            "Replication %s n=%d beta=%g r=%d failed: %s",
            item.scenario_id,
            item.n,
            item.beta,
            item.replication,
            exc,
        )
        return failed_row(
            item.scenario_id, item.n, item.beta, item.replication, item.seed, exc.code, scenario.d
        )
    return build_row(item.scenario_id, item.replication, report, terms, moments)


# =============================================================================
# Study driver
# =============================================================================


def work_items(config, w0):
    """All work items of a study, ordered by n, then beta, then replication."""
    w0 = tuple(float(value) for value in w0)
    for n, beta in config.cells:
        for replication in range(config.replications):
            yield WorkItem(
                scenario_id=config.scenario_id,
                n=int(n),
                beta=beta,
                replication=replication,
                seed=derive_seed(config.master_seed, config.scenario_id, n, beta, replication),
                backend=config.backend,
                w0=w0,
                panels=settings.EOS_QUADRATURE_PANELS,
                order=settings.EOS_QUADRATURE_ORDER,
            )


def iter_replications(config, w0=None, workers=None):
    """
    Yield rows in deterministic order. ``w0`` defaults to the scenario's
    cached optimal parameter.

    Raises:
        ReplicationAborted: the share of failed rows exceeds
            ``EOS_ABORT_FAILURE_RATE``.
    """
    if w0 is None:
        w0 = scenario_geometry(get_scenario(config.scenario_id)).w0
    workers = workers or settings.EOS_WORKERS
    total = config.total_rows
    allowed_failures = settings.EOS_ABORT_FAILURE_RATE * total
    items = work_items(config, w0)

    if workers <= 1:
        rows = map(replicate_one, items)
        executor = None
    else:
        executor = ProcessPoolExecutor(max_workers=workers, initializer=_init_worker)
        chunksize = max(1, total // (workers * 16))
        rows = executor.map(replicate_one, items, chunksize=chunksize)

    failures = 0
    step = max(1, total // 10)
    try:
        for done, row in enumerate(rows, start=1):
            if row["status"] != STATUS_OK:
                failures += 1
                if failures > allowed_failures:
                    raise ReplicationAborted(
                        f"{failures} of {total} rows failed "
                        f"(limit {settings.EOS_ABORT_FAILURE_RATE:.1%}); last: {row['status']}"
                    )
            if done % step == 0 or done == total:
                logger.info(
                    "%s: %d/%d rows (%d failed)", config.scenario_id, done, total, failures
                )
            yield row
    finally:
        if executor is not None:
            executor.shutdown(cancel_futures=True)


def run_replications(config, w0=None, workers=None):
    """
    Run the whole study and return its rows as a list.
    """
    logger.info(
        "Starting %s: n=%s beta=%s R=%d (%d rows, %d workers)",
        config.scenario_id,
        list(config.n_grid),
        list(config.beta_grid),
        config.replications,
        config.total_rows,
        workers or settings.EOS_WORKERS,
    )
    return list(iter_replications(config, w0, workers=workers))
