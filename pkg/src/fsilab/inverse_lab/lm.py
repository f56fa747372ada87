"""Projected Levenberg-Marquardt with a forward-difference Jacobian."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

logger = logging.getLogger(__name__)

ResidualFn = Callable[[np.ndarray], "np.ndarray | None"]


@dataclass
class LMResult:
    x: np.ndarray
    residual: np.ndarray | None
    cost: float
    history: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    unidentifiable: bool = False
    reason: str = ""
    n_evals: int = 0


def _cost(r):
    return 0.5 * float(r @ r)


def fd_jacobian(fun: ResidualFn, x: np.ndarray, r0: np.ndarray, rel_step: float = 1e-6,
                abs_floor: float = 1e-8, lower=None, upper=None) -> np.ndarray | None:
    """Forward differences, flipping to a backward step at an active upper bound.

    Returns None if any perturbed evaluation fails.
    """
    J = np.empty((r0.size, x.size))
    for i in range(x.size):
        h = max(rel_step * abs(x[i]), abs_floor)
        if upper is not None and x[i] + h > upper[i]:
            h = -h
        xp = x.copy()
        xp[i] += h
        rp = fun(xp)
        if rp is None:
            return None
        J[:, i] = (rp - r0) / h
    return J


def gradient_measure(J, r, x, g, project=lambda v: v) -> float:
    """Scale-free gradient test: max cosine between ``r`` and the columns of ``J``.

    Components of the gradient pushing into an active bound are ignored.
    """
    rn = np.linalg.norm(r)
    if rn == 0.0:
        return 0.0
    pg = x - project(x - g)
    cn = np.linalg.norm(J, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        cos = np.where(cn > 0, np.abs(pg) / (cn * rn), 0.0)
    return float(np.max(cos)) if cos.size else 0.0


def levenberg_marquardt(
    fun: ResidualFn,
    x0: np.ndarray,
    lower: np.ndarray | None = None,
    upper: np.ndarray | None = None,
    max_iter: int = 200,
    gtol: float = 1e-9,
    xtol: float = 1e-10,
    rel_step: float = 1e-6,
    abs_floor: float = 1e-8,
    damping0: float = 1e-3,
    max_damping: float = 1e16,
    cost_floor: float = 1e-24,
) -> LMResult:
    """Minimize ``0.5 |fun(x)|^2`` subject to ``lower <= x <= upper``.

    ``fun`` returns None to signal a failed evaluation; such trial points
    are rejected like uphill steps.  Damping is multiplied by 2 on rejection
    and divided by 3 on acceptance.  Stops when :func:`gradient_measure`
    drops below ``gtol``, when a step is shorter than ``xtol (1 + |x|)``, or
    after ``max_iter`` trial steps.  A cost at or below ``cost_floor`` counts
    as an exact fit: the cosine test is meaningless on roundoff residuals.
    """
    x = np.asarray(x0, dtype=float).copy()
    project = (lambda v: np.clip(v, lower, upper)) if (lower is not None or upper is not None) else (lambda v: v)
    x = project(x)
    n_evals = 1
    r = fun(x)
    if r is None:
        return LMResult(x, None, np.inf, [], 0, False, True, "initial evaluation failed", n_evals)
    cost = _cost(r)
    history = [cost]
    n_trials = n_failed = 0
    J = None
    mu = None
    it = 0
    reason = "max_iter"
    converged = False
    need_jac = True
    while it < max_iter:
        if need_jac:
            if cost <= cost_floor:
                converged, reason = True, "cost floor"
                break
            J = fd_jacobian(fun, x, r, rel_step, abs_floor, lower, upper)
            n_evals += x.size
            if J is None:
                reason = "jacobian evaluation failed"
                break
            JTJ = J.T @ J
            g = J.T @ r
            if mu is None:
                mu = damping0 * max(float(np.max(np.diag(JTJ))), 1e-300)
            need_jac = False
            if gradient_measure(J, r, x, g, project) < gtol:
                converged, reason = True, "gradient"
                break
        it += 1
        try:
            step = np.linalg.solve(JTJ + mu * np.eye(x.size), -g)
        except np.linalg.LinAlgError:
            mu *= 2.0
            continue
        x_new = project(x + step)
        actual = x_new - x
        r_new = fun(x_new)
        n_evals += 1
        n_trials += 1
        n_failed += r_new is None
        if r_new is not None and _cost(r_new) <= cost:
            x, r = x_new, r_new
            cost = _cost(r)
            history.append(cost)
            mu /= 3.0
            need_jac = True
            if np.linalg.norm(actual) < xtol * (1.0 + np.linalg.norm(x)):
                converged, reason = True, "step"
                break
        else:
            mu *= 2.0
            if r_new is not None and np.linalg.norm(actual) < xtol * (1.0 + np.linalg.norm(x)):
                converged, reason = True, "step"
                break
            if mu > max_damping:
                reason = "damping overflow"
                break
    logger.debug("LM finished after %d iterations (%s), cost %.3e", it, reason, cost)
    unidentifiable = n_trials > 0 and n_failed == n_trials
    return LMResult(x, r, cost, history, it, converged, unidentifiable, reason, n_evals)
