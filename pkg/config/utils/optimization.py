"""
Newton-type minimiser shared by the population (L) and empirical (L_n)
loss problems, built on ``scipy.optimize.minimize``.

Both problems have analytic Hessians and interior minimisers, so the
exact trust-region method is used. A parameter box is enforced as a wall:
the objective is +inf outside it, which makes the trust region reject any
step that would leave the box.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from config.exceptions import NoConvergence

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NewtonResult:
    x: np.ndarray
    value: float
    grad_norm: float
    iterations: int


def newton_minimize(fun, grad, hess, x0, bounds=None, tol=1e-8, max_iter=100):
    """
    Minimise ``fun`` with scipy's ``trust-exact`` method.

    Args:
        fun, grad, hess: callables of a 1-D parameter vector.
        x0: starting point; clipped into ``bounds``.
        bounds: optional (d, 2) array; iterates never leave it.
        tol: stop when the gradient norm falls below this value.
        max_iter: trust-region steps allowed before giving up.

    Returns:
        NewtonResult. A start at the optimum reports zero iterations.

    Raises:
        NoConvergence: the gradient norm is still above ``tol`` when the
            solver stops.
    """
    x0 = np.array(x0, dtype=float)
    objective = fun
    if bounds is not None:
        bounds = np.asarray(bounds, dtype=float)
        lower, upper = bounds[:, 0], bounds[:, 1]
        x0 = np.clip(x0, lower, upper)

        def objective(x):
            if np.any(x < lower) or np.any(x > upper):
                return np.inf
            return fun(x)

    res = minimize(
        objective,
        x0,
        jac=grad,
        hess=hess,
        method="trust-exact",
        options={"gtol": tol, "maxiter": max_iter},
    )

    grad_norm = float(np.linalg.norm(grad(res.x)))
    # precision loss at an already-flat point is not a failure
    if not res.success and not grad_norm <= tol:
        raise NoConvergence(
            f"gradient norm {grad_norm:.3e} after {res.nit} iterations: {res.message}"
        )

    logger.debug("Newton converged in %d iterations, |grad|=%.2e", res.nit, grad_norm)
    return NewtonResult(
        x=np.asarray(res.x, dtype=float),
        value=float(res.fun),
        grad_norm=grad_norm,
        iterations=int(res.nit),
    )
