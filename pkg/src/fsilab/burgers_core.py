"""IMEX stepper for one mapped side-domain.

Solves ``z_t - D(t) z_yy + (drift(y, t) + s(t) z) z_y = f`` on the fixed
interval ``[0, 1]`` with Dirichlet data at both ends.  Diffusion and
transport are both Crank-Nicolson in the unknown; the transport *velocity*
``drift + s z`` is lagged (extrapolated to the half step from the two most
recent levels), so every step is a single linear tridiagonal solve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg.lapack import dgtsv

from .geometry import Side, TimeGrid, TransformedCoefficients

PIVOT_FLOOR = 1e-14
PECLET_UPWIND = 2.0


class StepFailure(RuntimeError):
    """A time step produced non-finite values."""

    def __init__(self, level: int, message: str = "non-finite values"):
        super().__init__(f"step to level {level}: {message}")
        self.level = level


class SingularSystemError(StepFailure):
    pass


class SideField:
    """Velocity history on one reference side-domain.

    ``values[n, j]`` is the solution at time level ``n`` and node ``y_j = j h``.
    """

    def __init__(self, side: Side, n_cells: int, grid: TimeGrid, initial: np.ndarray):
        if n_cells < 3:
            raise ValueError("need at least 3 cells")
        self.side = side
        self.n_cells = int(n_cells)
        self.grid = grid
        self.values = np.full((len(grid), self.n_cells + 1), np.nan)
        initial = np.asarray(initial, dtype=float)
        if initial.shape != (self.n_cells + 1,):
            raise ValueError(f"initial profile must have {self.n_cells + 1} nodes")
        self.values[0] = initial
        self.level = 0

    @property
    def h(self) -> float:
        return 1.0 / self.n_cells

    @property
    def y(self) -> np.ndarray:
        return np.arange(self.n_cells + 1) * self.h

    @property
    def current(self) -> np.ndarray:
        return self.values[self.level]

    def copy(self) -> "SideField":
        new = SideField.__new__(SideField)
        new.side, new.n_cells, new.grid = self.side, self.n_cells, self.grid
        new.values = self.values.copy()
        new.level = self.level
        return new

    def commit(self, interior: np.ndarray, lower: float, upper: float) -> None:
        n = self.level + 1
        if not (np.all(np.isfinite(interior)) and np.isfinite(lower) and np.isfinite(upper)):
            raise StepFailure(n)
        row = self.values[n]
        row[0] = lower
        row[1:-1] = interior
        row[-1] = upper
        self.level = n

    def history(self) -> np.ndarray:
        return self.values[: self.level + 1]


@dataclass
class StepInputs:
    coef_old: TransformedCoefficients
    coef_new: TransformedCoefficients
    dirichlet_lower: float = 0.0
    dirichlet_upper: float = 0.0
    forcing: np.ndarray | None = None  # node values at t_{n+1/2}


@dataclass
class StepSystem:
    """Interior tridiagonal system; rhs is for zero Dirichlet data at t_{n+1}.

    ``col_lower``/``col_upper`` are the rhs responses to unit boundary values.
    """

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    rhs: np.ndarray
    col_lower: np.ndarray
    col_upper: np.ndarray
    level: int


def solve_tridiagonal(lower, diag, upper, rhs, level: int = -1) -> np.ndarray:
    """Solve a tridiagonal system (LAPACK gtsv, partial pivoting)."""
    if np.min(np.abs(diag)) < PIVOT_FLOOR:
        raise SingularSystemError(level, "tridiagonal pivot below floor")
    *_, x, info = dgtsv(lower, diag, upper, rhs)
    if info != 0:
        raise SingularSystemError(level, f"tridiagonal solve failed (info={info})")
    return x


def _derivative_weights(c: np.ndarray, D: float, h: float):
    """Per-node weights (w_minus, w_center, w_plus) approximating z_y.

    Central differences unless the cell Peclet number |c| h / D exceeds 2,
    where the first-order upwind difference is used instead.
    """
    wm = np.full_like(c, -0.5 / h)
    wc = np.zeros_like(c)
    wp = np.full_like(c, 0.5 / h)
    upwind = np.abs(c) * h > PECLET_UPWIND * D
    if np.any(upwind):
        pos = upwind & (c > 0)
        neg = upwind & (c <= 0)
        wm[pos], wc[pos], wp[pos] = -1.0 / h, 1.0 / h, 0.0
        wm[neg], wc[neg], wp[neg] = 0.0, -1.0 / h, 1.0 / h
    return wm, wc, wp


def advective_state(field: SideField, trial_next: np.ndarray | None = None) -> np.ndarray:
    """Velocity estimate at t_{n+1/2} used in the lagged transport coefficient."""
    n = field.level
    if trial_next is not None:
        return 0.5 * (field.values[n] + trial_next)
    if n >= 1:
        return 1.5 * field.values[n] - 0.5 * field.values[n - 1]
    return field.values[n]


def assemble_step(field: SideField, inputs: StepInputs, z_adv: np.ndarray | None = None) -> StepSystem:
    dt, h = field.grid.dt, field.h
    y = field.y[1:-1]
    zn = field.current
    if z_adv is None:
        z_adv = advective_state(field)
    c0, c1 = inputs.coef_old, inputs.coef_new
    D0, D1 = c0.diffusion, c1.diffusion
    D_half = 0.5 * (D0 + D1)
    drift = 0.5 * (c0.drift(y) + c1.drift(y))
    s_half = 0.5 * (c0.nonlinear_scale + c1.nonlinear_scale)
    c = drift + s_half * z_adv[1:-1]
    wm, wc, wp = _derivative_weights(c, D_half, h)

    r0 = 0.5 * dt * D0 / h**2
    r1 = 0.5 * dt * D1 / h**2
    a = 0.5 * dt * c
    # implicit: z - dt/2 D1 z_yy + dt/2 c z_y
    lower_full = -r1 + a * wm
    diag = 1.0 + 2.0 * r1 + a * wc
    upper_full = -r1 + a * wp

    zm, zc, zp = zn[:-2], zn[1:-1], zn[2:]
    rhs = zc + r0 * (zp - 2.0 * zc + zm) - a * (wm * zm + wc * zc + wp * zp)
    if inputs.forcing is not None:
        rhs = rhs + dt * np.asarray(inputs.forcing)[1:-1]

    m = field.n_cells - 1
    col_lower = np.zeros(m)
    col_upper = np.zeros(m)
    col_lower[0] = -lower_full[0]
    col_upper[-1] = -upper_full[-1]
    return StepSystem(lower_full[1:].copy(), diag, upper_full[:-1].copy(), rhs,
                      col_lower, col_upper, field.level + 1)


def solve_system(system: StepSystem, lower_value: float, upper_value: float) -> np.ndarray:
    rhs = system.rhs + lower_value * system.col_lower + upper_value * system.col_upper
    return solve_tridiagonal(system.lower, system.diag, system.upper, rhs, system.level)


def advance_step(field: SideField, inputs: StepInputs) -> SideField:
    """Advance ``field`` by one time level in place and return it."""
    lo, up = inputs.dirichlet_lower, inputs.dirichlet_upper
    z_adv = None
    if field.level == 0:
        # no history yet: one predictor pass supplies the half-step velocity
        trial = solve_system(assemble_step(field, inputs), lo, up)
        z_adv = advective_state(field, np.concatenate(([lo], trial, [up])))
    interior = solve_system(assemble_step(field, inputs, z_adv), lo, up)
    field.commit(interior, lo, up)
    return field


def flux_lower(z: np.ndarray, h: float) -> float:
    return (-3.0 * z[0] + 4.0 * z[1] - z[2]) / (2.0 * h)


def flux_upper(z: np.ndarray, h: float) -> float:
    return (3.0 * z[-1] - 4.0 * z[-2] + z[-3]) / (2.0 * h)


def boundary_flux(field: SideField, end: str, level: int | None = None) -> float:
    """Second-order one-sided ``z_y`` at the lower (y=0) or upper (y=1) node."""
    z = field.values[field.level if level is None else level]
    if end == "lower":
        return flux_lower(z, field.h)
    if end == "upper":
        return flux_upper(z, field.h)
    raise ValueError(f"end must be 'lower' or 'upper', got {end!r}")


def boundary_flux_series(values: np.ndarray, h: float, end: str) -> np.ndarray:
    """Vectorized :func:`boundary_flux` over a (levels, nodes) array."""
    if end == "lower":
        return (-3.0 * values[:, 0] + 4.0 * values[:, 1] - values[:, 2]) / (2.0 * h)
    return (3.0 * values[:, -1] - 4.0 * values[:, -2] + values[:, -3]) / (2.0 * h)


def residual_norm(field: SideField, coefficients, forcing=None, levels: tuple[int, int] | None = None) -> float:
    """Space-time L^2 norm of the defect of a centered discretization.

    ``coefficients[n]`` are the :class:`TransformedCoefficients` at level
    ``n``; ``forcing`` is an optional callable ``f(y, t)``.  The defect is
    evaluated at interior nodes and half levels with central differences
    and the transport velocity averaged between the two levels.
    """
    lo, hi = levels if levels is not None else (0, field.level)
    if hi - lo < 1:
        raise ValueError("need at least two time levels")
    dt, h = field.grid.dt, field.h
    y = field.y[1:-1]
    t = field.grid.t
    total = 0.0
    for n in range(lo, hi):
        z0, z1 = field.values[n], field.values[n + 1]
        c0, c1 = coefficients[n], coefficients[n + 1]
        lap0 = (z0[2:] - 2 * z0[1:-1] + z0[:-2]) / h**2
        lap1 = (z1[2:] - 2 * z1[1:-1] + z1[:-2]) / h**2
        dz = 0.25 * ((z0[2:] - z0[:-2]) + (z1[2:] - z1[:-2])) / h
        vel = 0.5 * (c0.drift(y) + c1.drift(y)) + 0.5 * (c0.nonlinear_scale + c1.nonlinear_scale) * 0.5 * (
            z0[1:-1] + z1[1:-1])
        r = (z1[1:-1] - z0[1:-1]) / dt - 0.5 * (c0.diffusion * lap0 + c1.diffusion * lap1) + vel * dz
        if forcing is not None:
            r = r - forcing(y, 0.5 * (t[n] + t[n + 1]))
        total += float(np.sum(r**2))
    return float(np.sqrt(total * h * dt))
