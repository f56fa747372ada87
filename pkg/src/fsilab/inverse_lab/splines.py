"""Clamped cubic B-splines on [0, T] used to parametrize unknown signals."""

from __future__ import annotations

import numpy as np
from scipy.interpolate import BSpline

DEGREE = 3


class SplineBasis:
    """Cubic B-spline space with ``n_knots`` uniform breakpoints on ``[0, T]``.

    The space has ``n_knots + 2`` coefficients.  With a clamped knot vector
    the value at 0 is ``c[0]`` and the slope at 0 is ``3 (c[1] - c[0]) / dk``
    (``dk`` the breakpoint spacing), which is how initial data is pinned.
    Design matrices for value and first two derivatives are cached for the
    sample times ``t``.
    """

    def __init__(self, T: float, n_knots: int, t: np.ndarray):
        if n_knots < 4:
            raise ValueError(f"need at least 4 knots, got {n_knots}")
        self.T = float(T)
        self.n_knots = int(n_knots)
        breaks = np.linspace(0.0, self.T, self.n_knots)
        self.spacing = breaks[1] - breaks[0]
        self.knots = np.concatenate([[0.0] * DEGREE, breaks, [self.T] * DEGREE])
        self.t = np.asarray(t, dtype=float)
        eye = np.eye(self.size)
        spl = BSpline(self.knots, eye, DEGREE, extrapolate=False)
        self.B0 = np.nan_to_num(spl(self.t))
        self.B1 = np.nan_to_num(spl.derivative(1)(self.t))
        self.B2 = np.nan_to_num(spl.derivative(2)(self.t))

    @property
    def size(self) -> int:
        return self.n_knots + DEGREE - 1

    def value(self, c):
        return self.B0 @ c

    def d1(self, c):
        return self.B1 @ c

    def d2(self, c):
        return self.B2 @ c

    def project(self, values: np.ndarray) -> np.ndarray:
        """Least-squares coefficients of sampled ``values`` on ``t``."""
        c, *_ = np.linalg.lstsq(self.B0, np.asarray(values, dtype=float), rcond=None)
        return c

    def project_pinned(self, values: np.ndarray, pinned: dict[int, float]) -> np.ndarray:
        """Least-squares projection with some coefficients held fixed."""
        free = [i for i in range(self.size) if i not in pinned]
        c = np.zeros(self.size)
        for i, v in pinned.items():
            c[i] = v
        rhs = np.asarray(values, dtype=float) - self.B0 @ c
        sol, *_ = np.linalg.lstsq(self.B0[:, free], rhs, rcond=None)
        c[free] = sol
        return c
