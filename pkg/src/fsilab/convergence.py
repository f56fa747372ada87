"""Refinement ladders: frozen domain against Cole-Hopf, and coupled self-convergence."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .burgers_core import SideField, StepInputs, advance_step
from .cole_hopf import ColeHopfSolution
from .fsi_forward import FsiProblem, solve_forward
from .geometry import TimeGrid, coefficients_at


@dataclass
class Ladder:
    name: str
    resolution: np.ndarray  # n_cells or n_steps
    error: np.ndarray

    @property
    def orders(self) -> np.ndarray:
        return observed_orders(self.resolution, self.error)

    @property
    def min_order(self) -> float:
        o = self.orders
        return float(np.min(o)) if o.size else np.nan


def observed_orders(resolution, error) -> np.ndarray:
    r = np.asarray(resolution, dtype=float)
    e = np.asarray(error, dtype=float)
    return np.log(e[:-1] / e[1:]) / np.log(r[1:] / r[:-1])


def frozen_domain_error(sol: ColeHopfSolution, n_cells: int, n_steps: int, T: float, p0: float = 0.0) -> float:
    """Max nodal error at ``T`` on the fixed left domain ``(-1, p0)``.

    The interface is frozen, so the mapped equation has no drift and the
    closed form supplies initial and Dirichlet data.
    """
    grid = TimeGrid(T, n_steps)
    y = np.arange(n_cells + 1) / n_cells
    x = y * (1.0 + p0) - 1.0
    field = SideField("left", n_cells, grid, sol.u(x, 0.0))
    coef = coefficients_at(p0, 0.0, "left", viscosity=sol.viscosity)
    t = grid.t
    for n in range(n_steps):
        advance_step(field, StepInputs(coef, coef, float(sol.u(-1.0, t[n + 1])), float(sol.u(p0, t[n + 1]))))
    return float(np.max(np.abs(field.current - sol.u(x, T))))


def spatial_ladder(sol: ColeHopfSolution, cells, steps_per_cell: int, T: float) -> Ladder:
    cells = np.asarray(cells, dtype=int)
    err = [frozen_domain_error(sol, int(n), int(steps_per_cell * n), T) for n in cells]
    return Ladder("space", cells, np.asarray(err))


def temporal_ladder(sol: ColeHopfSolution, steps, n_cells: int, T: float) -> Ladder:
    steps = np.asarray(steps, dtype=int)
    err = [frozen_domain_error(sol, n_cells, int(n), T) for n in steps]
    return Ladder("time", steps, np.asarray(err))


def coupled_self_convergence(problem: FsiProblem, cells, steps_per_cell: int) -> Ladder:
    """Successive sup differences of ``p`` on nested grids (time refined with space).

    The error attached to level ``i`` is ``|p_i - p_{i+1}|_inf`` on the
    coarser time grid, so the ladder is one entry shorter than ``cells``.
    """
    cells = [int(c) for c in cells]
    ps = []
    for n in cells:
        prob = dataclasses.replace(problem, n_cells_left=n, n_cells_right=n, n_steps=steps_per_cell * n)
        ps.append(solve_forward(prob).traj.p)
    diffs = [float(np.max(np.abs(ps[i] - ps[i + 1][::cells[i + 1] // cells[i]]))) for i in range(len(cells) - 1)]
    return Ladder("coupled", np.asarray(cells[:-1]), np.asarray(diffs))
