"""
Row schema for replication output.

One row per (scenario, n, beta, replication). Vector and matrix fields are
flattened into numbered columns (w_map_1, second_moment_12, ...); symmetric
matrices keep their upper triangle.
"""

import math

import numpy as np

STATUS_OK = "ok"

KEY_FIELDS = ["scenario_id", "n", "beta", "replication", "seed", "status"]
SCALAR_FIELDS = ["b_g", "b_t", "g_g", "g_t", "v", "waic", "tic_n"]
D_FIELDS = [f"d{k}" for k in range(1, 7)]
VECTOR_FIELDS = ["w_map", "w_mle", "mean_offset"]
MATRIX_FIELDS = ["second_moment", "w0_second_moment", "laplace_cov"]
MOMENT_SCALARS = ["third_abs_moment", "w0_third_abs_moment", "acceptance_rate"]


def vector_columns(name, d):
    return [f"{name}_{i + 1}" for i in range(d)]


def matrix_columns(name, d):
    return [f"{name}_{i + 1}{j + 1}" for i in range(d) for j in range(i, d)]


def row_fields(d):
    """Ordered CSV columns for a d-parameter scenario."""
    fields = KEY_FIELDS + SCALAR_FIELDS + D_FIELDS
    for name in VECTOR_FIELDS:
        fields += vector_columns(name, d)
    for name in MATRIX_FIELDS:
        fields += matrix_columns(name, d)
    return fields + MOMENT_SCALARS


def numeric_fields(d):
    return [name for name in row_fields(d) if name not in KEY_FIELDS]


def _flatten_vector(name, values):
    values = np.asarray(values, dtype=float).reshape(-1)
    return dict(zip(vector_columns(name, values.size), values.tolist()))


def _flatten_matrix(name, matrix):
    matrix = np.asarray(matrix, dtype=float)
    d = matrix.shape[0]
    upper = [matrix[i, j] for i in range(d) for j in range(i, d)]
    return dict(zip(matrix_columns(name, d), [float(value) for value in upper]))


def build_row(scenario_id, replication, report, terms, moments):
    row = {
        "scenario_id": scenario_id,
        "n": report.n,
        "beta": report.beta,
        "replication": int(replication),
        "seed": report.seed,
        "status": STATUS_OK,
    }
    row.update({name: float(getattr(report, name)) for name in SCALAR_FIELDS})
    row.update(terms.as_dict())
    row.update(_flatten_vector("w_map", report.w_map))
    row.update(_flatten_vector("w_mle", report.w_mle))
    row.update(_flatten_vector("mean_offset", moments["mean_offset"]))
    for name in MATRIX_FIELDS:
        row.update(_flatten_matrix(name, moments[name]))
    for name in MOMENT_SCALARS:
        row[name] = float(moments[name])
    return {name: row[name] for name in row_fields(np.asarray(report.w_map).size)}


def failed_row(scenario_id, n, beta, replication, seed, status, d):
    """A flagged row: key columns plus NaN in every numeric column."""
    row = dict.fromkeys(numeric_fields(d), math.nan)
    row.update(
        {
            "scenario_id": scenario_id,
            "n": int(n),
            "beta": beta,
            "replication": int(replication),
            "seed": int(seed),
            "status": status,
        }
    )
    return {name: row[name] for name in row_fields(d)}


def unflatten_matrix(row, name, d):
    """Rebuild a symmetric d x d matrix from its upper-triangle columns."""
    matrix = np.empty((d, d))
    for i in range(d):
        for j in range(i, d):
            matrix[i, j] = matrix[j, i] = row[f"{name}_{i + 1}{j + 1}"]
    return matrix


def unflatten_vector(row, name, d):
    return np.array([row[column] for column in vector_columns(name, d)], dtype=float)
