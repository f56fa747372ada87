"""Coupled fluid-particle simulator on (-1, 1).

Each side of the particle is carried on its own reference grid (see
:mod:`fsilab.geometry`); the particle obeys ``p'' = [w_x](p(t), t)`` with the
kinematic condition ``w(p(t), t) = p'(t)`` imposed as a Dirichlet value on
both sides.

Per step the particle is integrated with a velocity-Verlet predictor and a
trapezoidal corrector.  Inside a coupling pass the side systems are linear
in the interface velocity, so the corrector equation for ``p'_{n+1}`` is
solved exactly by superposition of two right-hand sides; remaining passes
only refresh the geometry coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from . import burgers_core as bc
from .burgers_core import SideField, StepInputs
from .geometry import (
    DEFAULT_DELTA,
    GeometryError,
    InterfaceTrajectory,
    TimeGrid,
    coefficients_at,
    map_left_from_reference,
    map_right_from_reference,
)

Signal = Union[Callable, np.ndarray, float]


class ProblemError(ValueError):
    """Inconsistent or inadmissible problem data."""


class SimulationAbort(RuntimeError):
    """Forward run stopped early; ``partial`` holds the solution so far."""

    reason = "simulation abort"

    def __init__(self, message: str, partial: "FsiSolution | None" = None, level: int | None = None):
        super().__init__(f"{self.reason}: {message}")
        self.partial = partial
        self.level = level


class InterfaceMarginError(SimulationAbort):
    reason = "interface-margin violation"


class CouplingDivergence(SimulationAbort):
    reason = "coupling divergence"


class StepFailed(SimulationAbort):
    reason = "step failure"


def sample_signal(sig: Signal, t: np.ndarray) -> np.ndarray:
    if callable(sig):
        return np.broadcast_to(np.asarray(sig(t), dtype=float), t.shape).copy()
    arr = np.asarray(sig, dtype=float)
    if arr.ndim == 0:
        return np.full(t.shape, float(arr))
    if arr.shape != t.shape:
        raise ProblemError(f"sampled signal has {arr.shape[0]} values, grid has {t.shape[0]}")
    return arr.copy()


@dataclass
class FsiProblem:
    w0: Callable
    alpha: Signal
    eta: Signal
    q0: float
    q1: float
    T: float = 1.0
    n_steps: int = 256
    n_cells_left: int = 64
    n_cells_right: int = 64
    delta: float = DEFAULT_DELTA
    viscosity: float = 1.0
    coupling_iters: int = 2
    coupling_tol: float = 1e-10
    compat_tol: float = 1e-8
    check_cfl: bool = True

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid(self.T, self.n_steps)

    def alpha_values(self) -> np.ndarray:
        return sample_signal(self.alpha, self.grid.t)

    def eta_values(self) -> np.ndarray:
        return sample_signal(self.eta, self.grid.t)

    def validate(self) -> None:
        if not abs(self.q0) <= 1.0 - self.delta:
            raise ProblemError(f"|q0| = {abs(self.q0)} exceeds 1 - delta = {1.0 - self.delta}")
        if self.n_cells_left < 3 or self.n_cells_right < 3:
            raise ProblemError("each side needs at least 3 cells")
        a0, e0 = self.alpha_values()[0], self.eta_values()[0]
        checks = {
            "w0(-1) = alpha(0)": (float(self.w0(-1.0)), a0),
            "w0(1) = eta(0)": (float(self.w0(1.0)), e0),
            "w0(q0) = q1": (float(self.w0(self.q0)), self.q1),
        }
        for name, (lhs, rhs) in checks.items():
            if abs(lhs - rhs) > self.compat_tol:
                raise ProblemError(f"incompatible data: {name} fails ({lhs!r} vs {rhs!r}, tol {self.compat_tol})")

    def check_cfl_condition(self) -> None:
        """Advective CFL ``dt * max speed <= h`` estimated from data magnitudes."""
        xs = np.linspace(-1.0, 1.0, 2 * max(self.n_cells_left, self.n_cells_right) + 1)
        U = max(np.max(np.abs(self.w0(xs))), np.max(np.abs(self.alpha_values())),
                np.max(np.abs(self.eta_values())), abs(self.q1))
        # reference-frame speed |drift| + s|z| <= 2 U / (1 -|p|) <= 2 U / delta
        speed = 2.0 * U / self.delta
        h = 1.0 / max(self.n_cells_left, self.n_cells_right)
        if speed * self.grid.dt > h:
            raise ProblemError(
                f"CFL violated: dt*speed = {speed * self.grid.dt:.3g} > h = {h:.3g}; increase n_steps")


@dataclass
class CauchyTraces:
    grid: TimeGrid
    alpha: np.ndarray
    beta: np.ndarray
    eta: np.ndarray
    eta_flux: np.ndarray
    jump: np.ndarray


@dataclass
class FsiSolution:
    left: SideField
    right: SideField | None
    traj: InterfaceTrajectory
    traces: CauchyTraces
    problem: FsiProblem
    complete: bool = True
    prescribed: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def n_levels(self) -> int:
        return self.left.level + 1

    def jump_defect(self) -> np.ndarray:
        return self.traces.jump - self.traj.p_ddot


def initial_fields(problem: FsiProblem, grid: TimeGrid, p0: float, interface_value: float,
                   alpha0: float, eta0: float, with_right: bool = True):
    y_left = np.arange(problem.n_cells_left + 1) / problem.n_cells_left
    z0 = np.asarray(problem.w0(map_left_from_reference(y_left, p0)), dtype=float).copy()
    z0[0], z0[-1] = alpha0, interface_value
    left = SideField("left", problem.n_cells_left, grid, z0)
    right = None
    if with_right:
        y_right = np.arange(problem.n_cells_right + 1) / problem.n_cells_right
        v0 = np.asarray(problem.w0(map_right_from_reference(y_right, p0)), dtype=float).copy()
        v0[0], v0[-1] = interface_value, eta0
        right = SideField("right", problem.n_cells_right, grid, v0)
    return left, right


def record_traces(grid: TimeGrid, left: SideField, right: SideField | None, p: np.ndarray) -> CauchyTraces:
    L = left.history()
    n = L.shape[0]
    pl = 1.0 + p[:n]
    alpha = L[:, 0].copy()
    beta = bc.boundary_flux_series(L, left.h, "lower") / pl
    u_x_iface = bc.boundary_flux_series(L, left.h, "upper") / pl
    if right is not None:
        R = right.history()
        pr = 1.0 - p[:n]
        eta = R[:, -1].copy()
        eta_flux = bc.boundary_flux_series(R, right.h, "upper") / pr
        jump = bc.boundary_flux_series(R, right.h, "lower") / pr - u_x_iface
    else:
        eta = eta_flux = jump = np.full(n, np.nan)
    return CauchyTraces(grid, alpha, beta, eta, eta_flux, jump)


def _truncate(grid: TimeGrid, arr: np.ndarray, n: int) -> np.ndarray:
    out = arr.copy()
    out[n:] = np.nan
    return out


def _package(problem, grid, left, right, p, pd, pdd, complete, prescribed=False, meta=None):
    n = left.level + 1
    traj = InterfaceTrajectory(grid, _truncate(grid, p, n), _truncate(grid, pd, n), _truncate(grid, pdd, n),
                               delta=problem.delta)
    traces = record_traces(grid, left, right, traj.p)
    if n < len(grid):
        pad = len(grid) - n
        traces = CauchyTraces(grid, *(np.concatenate([s, np.full(pad, np.nan)]) for s in (
            traces.alpha, traces.beta, traces.eta, traces.eta_flux, traces.jump)))
    return FsiSolution(left, right, traj, traces, problem, complete, prescribed, meta or {})


def solve_forward(problem: FsiProblem, validate: bool = True) -> FsiSolution:
    """Simulate the coupled system; raises :class:`SimulationAbort` subclasses."""
    if validate:
        problem.validate()
        if problem.check_cfl:
            problem.check_cfl_condition()
    grid = problem.grid
    dt = grid.dt
    nu, delta = problem.viscosity, problem.delta
    alpha, eta = problem.alpha_values(), problem.eta_values()
    N = len(grid)
    p, pd, pdd = np.zeros(N), np.zeros(N), np.zeros(N)
    p[0], pd[0] = problem.q0, problem.q1

    left, right = initial_fields(problem, grid, problem.q0, problem.q1, alpha[0], eta[0])
    hl, hr = left.h, right.h
    pdd[0] = (bc.boundary_flux(right, "lower") / (1.0 - p[0])
              - bc.boundary_flux(left, "upper") / (1.0 + p[0]))

    passes_used = []
    for n in range(grid.n_steps):
        try:
            cL0 = coefficients_at(p[n], pd[n], "left", delta, nu)
            cR0 = coefficients_at(p[n], pd[n], "right", delta, nu)
        except GeometryError as exc:
            raise InterfaceMarginError(str(exc), _package(problem, grid, left, right, p, pd, pdd, False), n)
        p_est = p[n] + dt * pd[n] + 0.5 * dt**2 * pdd[n]
        pd_est = pd[n] + dt * pdd[n]
        prev_change = np.inf
        trial_L = trial_R = None
        for k in range(problem.coupling_iters):
            try:
                cL1 = coefficients_at(p_est, pd_est, "left", delta, nu)
                cR1 = coefficients_at(p_est, pd_est, "right", delta, nu)
            except GeometryError as exc:
                raise InterfaceMarginError(str(exc), _package(problem, grid, left, right, p, pd, pdd, False), n)
            zadv_L = bc.advective_state(left, trial_L) if n == 0 and trial_L is not None else None
            zadv_R = bc.advective_state(right, trial_R) if n == 0 and trial_R is not None else None
            sysL = bc.assemble_step(left, StepInputs(cL0, cL1), zadv_L)
            sysR = bc.assemble_step(right, StepInputs(cR0, cR1), zadv_R)
            try:
                solL = bc.solve_tridiagonal(sysL.lower, sysL.diag, sysL.upper,
                                            np.column_stack([sysL.rhs + alpha[n + 1] * sysL.col_lower,
                                                             sysL.col_upper]), n + 1)
                solR = bc.solve_tridiagonal(sysR.lower, sysR.diag, sysR.upper,
                                            np.column_stack([sysR.rhs + eta[n + 1] * sysR.col_upper,
                                                             sysR.col_lower]), n + 1)
            except bc.StepFailure as exc:
                raise StepFailed(str(exc), _package(problem, grid, left, right, p, pd, pdd, False), n + 1)
            zA, zB = solL[:, 0], solL[:, 1]
            vA, vB = solR[:, 0], solR[:, 1]
            # one-sided fluxes are affine in the interface value q: F = F_A + q F_B
            FzA = (-4.0 * zA[-1] + zA[-2]) / (2.0 * hl)
            FzB = (3.0 - 4.0 * zB[-1] + zB[-2]) / (2.0 * hl)
            FvA = (4.0 * vA[0] - vA[1]) / (2.0 * hr)
            FvB = (-3.0 + 4.0 * vB[0] - vB[1]) / (2.0 * hr)
            g0 = FvA / (1.0 - p_est) - FzA / (1.0 + p_est)
            g1 = FvB / (1.0 - p_est) - FzB / (1.0 + p_est)
            q = (pd[n] + 0.5 * dt * (pdd[n] + g0)) / (1.0 - 0.5 * dt * g1)
            acc = g0 + g1 * q
            p_new = p[n] + 0.5 * dt * (pd[n] + q)
            change = abs(p_new - p_est)
            if not np.isfinite(p_new) or (k > 0 and change > 2.0 * prev_change and change > 1e-8):
                raise CouplingDivergence(f"update grew from {prev_change:.3g} to {change:.3g} at step {n}",
                                         _package(problem, grid, left, right, p, pd, pdd, False), n + 1)
            p_est, pd_est, prev_change = p_new, q, change
            trial_L = np.concatenate(([alpha[n + 1]], zA + q * zB, [q]))
            trial_R = np.concatenate(([q], vA + q * vB, [eta[n + 1]]))
            if change < problem.coupling_tol:
                break
        passes_used.append(k + 1)
        try:
            left.commit(zA + q * zB, alpha[n + 1], q)
            right.commit(vA + q * vB, q, eta[n + 1])
        except bc.StepFailure as exc:
            raise StepFailed(str(exc), _package(problem, grid, left, right, p, pd, pdd, False), n + 1)
        p[n + 1], pd[n + 1], pdd[n + 1] = p_new, q, acc
        if not abs(p_new) <= 1.0 - delta:
            raise InterfaceMarginError(
                f"|p| = {abs(p_new):.6g} > {1.0 - delta:.6g} at t = {grid.t[n + 1]:.6g}",
                _package(problem, grid, left, right, p, pd, pdd, False), n + 1)

    return _package(problem, grid, left, right, p, pd, pdd, True,
                    meta={"coupling_passes": np.asarray(passes_used)})


def solve_prescribed(problem: FsiProblem, traj: InterfaceTrajectory, interface_trace: Signal | None = None,
                     with_right: bool = True) -> FsiSolution:
    """Advance the fluid with a prescribed interface path (no particle ODE).

    The interface Dirichlet value is ``interface_trace`` (default: the
    kinematic value ``traj.p_dot``).  The Newton-law defect is available as
    :meth:`FsiSolution.jump_defect`.
    """
    grid = problem.grid
    if len(traj.grid) != len(grid) or traj.grid.T != grid.T:
        raise ProblemError("trajectory grid does not match problem grid")
    report = traj.validate()
    if not report.within_margin:
        raise GeometryError(f"trajectory leaves |p| <= 1 - delta (max |p| = {report.max_abs_p:.6g})")
    nu, delta = problem.viscosity, traj.delta
    alpha = problem.alpha_values()
    eta = problem.eta_values() if with_right else None
    g = traj.p_dot if interface_trace is None else sample_signal(interface_trace, grid.t)
    left, right = initial_fields(problem, grid, traj.p[0], g[0], alpha[0],
                                 eta[0] if with_right else 0.0, with_right)
    for n in range(grid.n_steps):
        cL0 = coefficients_at(traj.p[n], traj.p_dot[n], "left", delta, nu)
        cL1 = coefficients_at(traj.p[n + 1], traj.p_dot[n + 1], "left", delta, nu)
        try:
            bc.advance_step(left, StepInputs(cL0, cL1, alpha[n + 1], g[n + 1]))
            if with_right:
                cR0 = coefficients_at(traj.p[n], traj.p_dot[n], "right", delta, nu)
                cR1 = coefficients_at(traj.p[n + 1], traj.p_dot[n + 1], "right", delta, nu)
                bc.advance_step(right, StepInputs(cR0, cR1, g[n + 1], eta[n + 1]))
        except bc.StepFailure as exc:
            raise StepFailed(str(exc), None, n + 1)
    traces = record_traces(grid, left, right, traj.p)
    return FsiSolution(left, right, traj, traces, problem, True, True)


def extract_observation(sol: FsiSolution) -> tuple[np.ndarray, np.ndarray]:
    return sol.traces.alpha.copy(), sol.traces.beta.copy()


def check_jump_consistency(sol: FsiSolution) -> float:
    """Max over ``t > 0`` of ``|[w_x](p(t), t) - p''(t)|``."""
    d = sol.jump_defect()[1:]
    d = d[np.isfinite(d)]
    return float(np.max(np.abs(d))) if d.size else 0.0
