"""
Aggregation of replication rows into per-(n, beta) means and standard errors.

Besides the raw row fields, every cell carries derived per-replication
quantities. Training-loss excesses are taken relative to the training loss
at w0, L_n(w0) = G_t - D4, whose expectation is exactly S; their spread is
O(1/n) instead of O(1/sqrt(n)).
"""

import logging
import math
from collections import OrderedDict

import numpy as np

from functionals.schema import STATUS_OK, numeric_fields

from .models import AggregateCell, AggregateReport

logger = logging.getLogger(__name__)


def derived_quantities(row, S):
    n = row["n"]
    beta = row["beta"]
    beta_v = 0.0 if math.isinf(beta) else beta * row["v"]
    train_at_w0 = row["g_t"] - row["d4"]

    b_g_excess = row["b_g"] - S
    b_t_excess = row["b_t"] - train_at_w0
    g_g_excess = row["g_g"] - S
    g_t_excess = row["g_t"] - train_at_w0
    eos_bayes = b_g_excess - b_t_excess - beta_v / n
    eos_gibbs = g_g_excess - g_t_excess - beta_v / n
    return {
        "beta_v": beta_v,
        "beta_v_over_n": beta_v / n,
        "bg_minus_bt": row["b_g"] - row["b_t"],
        "gg_minus_gt": row["g_g"] - row["g_t"],
        "train_loss_at_w0": train_at_w0,
        "b_g_excess": b_g_excess,
        "b_t_excess": b_t_excess,
        "g_g_excess": g_g_excess,
        "g_t_excess": g_t_excess,
        "eos_bayes": eos_bayes,
        "eos_gibbs": eos_gibbs,
        "n_eos_bayes": n * eos_bayes,
        "n_bayes_gap": n * (b_g_excess - b_t_excess),
        "waic_gap": row["waic"] - n * train_at_w0 - n * b_g_excess,
        "d5_minus_d2": row["d5"] - row["d2"],
        "d6_minus_d3": row["d6"] - row["d3"],
    }


def _group(rows):
    groups = OrderedDict()
    for row in rows:
        groups.setdefault((int(row["n"]), float(row["beta"])), []).append(row)
    return groups


def aggregate(rows, S, scenario_id=None, d=None):
    """
    Means and standard errors (sample SD / sqrt(count)) per (n, beta) cell.

    Only rows with status "ok" enter the averages; the others are counted
    in ``failed``.
    """
    rows = list(rows)
    if scenario_id is None and rows:
        scenario_id = rows[0]["scenario_id"]
    if d is None:
        d = sum(1 for name in rows[0] if name.startswith("w_map_")) if rows else 1

    fields = numeric_fields(d)
    cells = OrderedDict()
    for (n, beta), group in _group(rows).items():
        good = [row for row in group if row["status"] == STATUS_OK]
        means, ses = {}, {}
        if good:
            table = {name: np.array([row[name] for row in good], dtype=float) for name in fields}
            derived = [derived_quantities(row, S) for row in good]
            for name in derived[0]:
                table[name] = np.array([values[name] for values in derived], dtype=float)
            for name, values in table.items():
                means[name] = float(np.mean(values))
                ses[name] = (
                    float(np.std(values, ddof=1) / math.sqrt(values.size))
                    if values.size > 1
                    else math.nan
                )
        cells[(n, beta)] = AggregateCell(
            n=n,
            beta=beta,
            count=len(good),
            failed=len(group) - len(good),
            means=means,
            ses=ses,
        )
        if len(good) < len(group):
            logger.warning(
                "Cell n=%d beta=%g: %d of %d rows flagged", n, beta, len(group) - len(good), len(group)
            )
    return AggregateReport(scenario_id=scenario_id, cells=cells)


def rows_for(rows, n=None, beta=None):
    """Successful rows, optionally restricted to one n and/or beta."""
    return [
        row
        for row in rows
        if row["status"] == STATUS_OK
        and (n is None or int(row["n"]) == n)
        and (beta is None or float(row["beta"]) == beta)
    ]
