"""Interface trajectories and the interface-fitted coordinate maps.

The moving fluid subdomains ``(-1, p(t))`` and ``(p(t), 1)`` are flattened
onto the fixed reference interval ``[0, 1]``:

    left:   y    = (x + 1) / (p + 1)
    right:  ybar = (x - p) / (1 - p)

after which the Burgers equation ``w_t - nu w_xx + w w_x = 0`` becomes

    z_t - D(t) z_yy + (drift(y, t) + s(t) z) z_y = 0

with the coefficients returned by :func:`coefficients_at`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

Side = Literal["left", "right"]

DEFAULT_DELTA = 0.1


class GeometryError(ValueError):
    """Raised for inputs outside an admissible domain."""


@dataclass(frozen=True)
class TimeGrid:
    T: float
    n_steps: int

    def __post_init__(self):
        if not self.T > 0:
            raise GeometryError(f"final time must be positive, got T={self.T}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise GeometryError(f"n_steps must be a positive integer, got {self.n_steps}")

    @property
    def dt(self) -> float:
        return self.T / self.n_steps

    @property
    def t(self) -> np.ndarray:
        # j*dt rather than linspace keeps t_j bit-identical to how the stepper advances
        t = np.arange(self.n_steps + 1) * self.dt
        t[-1] = self.T
        return t

    def __len__(self):
        return self.n_steps + 1


@dataclass
class ValidationReport:
    max_abs_p: float
    h2_norm: float
    margin: float
    within_margin: bool
    within_bound: bool
    initial_ok: bool

    @property
    def passed(self) -> bool:
        return self.within_margin and self.within_bound and self.initial_ok


@dataclass
class InterfaceTrajectory:
    """Sampled particle position, velocity and acceleration on a time grid."""

    grid: TimeGrid
    p: np.ndarray
    p_dot: np.ndarray
    p_ddot: np.ndarray
    delta: float = DEFAULT_DELTA
    bound_M: float | None = None

    def __post_init__(self):
        n = len(self.grid)
        self.p = np.asarray(self.p, dtype=float)
        self.p_dot = np.asarray(self.p_dot, dtype=float)
        self.p_ddot = np.asarray(self.p_ddot, dtype=float)
        for name in ("p", "p_dot", "p_ddot"):
            if getattr(self, name).shape != (n,):
                raise GeometryError(f"{name} must have {n} samples")
        if not 0 < self.delta < 1:
            raise GeometryError(f"delta must lie in (0, 1), got {self.delta}")

    @classmethod
    def from_functions(
        cls,
        grid: TimeGrid,
        p: Callable,
        p_dot: Callable,
        p_ddot: Callable,
        **kwargs,
    ) -> "InterfaceTrajectory":
        t = grid.t
        return cls(grid, p(t), p_dot(t), p_ddot(t), **kwargs)

    @classmethod
    def constant(cls, grid: TimeGrid, q0: float, **kwargs) -> "InterfaceTrajectory":
        n = len(grid)
        return cls(grid, np.full(n, float(q0)), np.zeros(n), np.zeros(n), **kwargs)

    def h2_norm(self) -> float:
        """Discrete H^2(0,T) norm by trapezoidal quadrature."""
        integrand = self.p**2 + self.p_dot**2 + self.p_ddot**2
        return float(np.sqrt(np.trapezoid(integrand, dx=self.grid.dt)))

    def validate(self, q0: float | None = None, q1: float | None = None, tol: float = 1e-12) -> ValidationReport:
        max_abs = float(np.max(np.abs(self.p)))
        h2 = self.h2_norm()
        bound = 1.0 - self.delta
        initial_ok = True
        if q0 is not None:
            initial_ok &= abs(self.p[0] - q0) <= tol
        if q1 is not None:
            initial_ok &= abs(self.p_dot[0] - q1) <= tol
        return ValidationReport(
            max_abs_p=max_abs,
            h2_norm=h2,
            margin=bound - max_abs,
            within_margin=max_abs <= bound,
            within_bound=self.bound_M is None or h2 <= self.bound_M,
            initial_ok=bool(initial_ok),
        )


def validate_trajectory(traj: InterfaceTrajectory, **kwargs) -> ValidationReport:
    return traj.validate(**kwargs)


def _check_interface(p_t: float, delta: float) -> None:
    if not abs(p_t) <= 1.0 - delta:
        raise GeometryError(f"interface position {p_t} violates |p| <= 1 - delta = {1.0 - delta}")


def map_left_to_reference(x, p_t: float, delta: float = DEFAULT_DELTA):
    _check_interface(p_t, delta)
    x = np.asarray(x, dtype=float)
    if np.any(x < -1.0) or np.any(x > p_t):
        raise GeometryError(f"x must lie in [-1, {p_t}]")
    return (x + 1.0) / (p_t + 1.0)


def map_left_from_reference(y, p_t: float):
    return np.asarray(y, dtype=float) * (p_t + 1.0) - 1.0


def map_right_to_reference(x, p_t: float, delta: float = DEFAULT_DELTA):
    _check_interface(p_t, delta)
    x = np.asarray(x, dtype=float)
    if np.any(x < p_t) or np.any(x > 1.0):
        raise GeometryError(f"x must lie in [{p_t}, 1]")
    return (x - p_t) / (1.0 - p_t)


def map_right_from_reference(ybar, p_t: float):
    return p_t + np.asarray(ybar, dtype=float) * (1.0 - p_t)


def flip_reference(y):
    """Reflection ``x* = 2 - 2y`` placing the observed end at ``x* = 2``."""
    y = np.asarray(y, dtype=float)
    if np.any(y < 0.0) or np.any(y > 1.0):
        raise GeometryError("y must lie in [0, 1]")
    return 2.0 - 2.0 * y


def time_rescale_factor(t_bar: float, T: float) -> float:
    """Factor ``T / (2 t_bar)`` that sends ``t_bar`` to ``T/2``."""
    if not t_bar > 0:
        raise GeometryError(f"t_bar must be positive, got {t_bar}")
    if t_bar > T:
        raise GeometryError(f"t_bar={t_bar} exceeds T={T}")
    return T / (2.0 * t_bar)


@dataclass(frozen=True)
class TransformedCoefficients:
    """Coefficients of the mapped Burgers equation at one time level.

    The drift is affine in the reference coordinate, ``drift(y) =
    drift_slope * y + drift_offset``; for the interface maps it vanishes at
    the outer (fixed) boundary.
    """

    side: Side
    diffusion: float
    nonlinear_scale: float
    drift_slope: float = 0.0
    drift_offset: float = 0.0
    p: float = field(default=0.0, compare=False)
    p_dot: float = field(default=0.0, compare=False)

    def drift(self, y):
        return self.drift_slope * np.asarray(y, dtype=float) + self.drift_offset


def coefficients_at(p: float, p_dot: float, side: Side, delta: float = DEFAULT_DELTA,
                    viscosity: float = 1.0) -> TransformedCoefficients:
    _check_interface(p, delta)
    if side == "left":
        L = 1.0 + p
        # -y p'/(1+p)
        return TransformedCoefficients("left", viscosity / L**2, 1.0 / L, -p_dot / L, 0.0, p, p_dot)
    if side == "right":
        L = 1.0 - p
        # -(1-ybar) p'/(1-p)
        return TransformedCoefficients("right", viscosity / L**2, 1.0 / L, p_dot / L, -p_dot / L, p, p_dot)
    raise GeometryError(f"unknown side {side!r}")


def transformed_coefficients(traj: InterfaceTrajectory, side: Side, j: int,
                             viscosity: float = 1.0) -> TransformedCoefficients:
    return coefficients_at(traj.p[j], traj.p_dot[j], side, traj.delta, viscosity)


def frozen_coefficients(side: Side = "left", diffusion: float = 1.0,
                        nonlinear_scale: float = 1.0) -> TransformedCoefficients:
    """Coefficients of a fixed domain, bypassing the interface map."""
    return TransformedCoefficients(side, diffusion, nonlinear_scale)
