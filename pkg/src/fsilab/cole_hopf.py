"""Closed-form Burgers solutions from the heat kernel mode ``sin(ax)``.

With ``phi(x, t) = exp(-nu a^2 t) sin(a x) + A`` solving ``phi_t = nu phi_xx``,
the Cole-Hopf substitution ``u = -c phi_x / phi`` gives

* ``c = 2 nu``: an exact solution of ``u_t - nu u_xx + u u_x = 0``;
* ``c = 1`` (with ``nu = 1``): the normalization written in the lateral
  non-uniqueness counterexample, which solves ``u_t - u_xx + 2 u u_x = 0``.

Both share the same Cauchy data at ``x = 0`` for all modes with equal ``a``,
which is the point of :func:`counterexample_pair`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class ColeHopfSolution:
    a: float
    A: float
    domain_length: float = 1.0
    n: int = 1
    viscosity: float = 1.0
    coefficient: float | None = None  # c in u = -c phi_x/phi; None -> 2*viscosity

    def __post_init__(self):
        if not self.A > 1.0:
            # |exp(-a^2 t) sin(ax)| <= 1, so A > 1 keeps phi > 0
            raise ValueError(f"offset A must exceed 1 for phi > 0, got {self.A}")

    @classmethod
    def mode(cls, domain_length: float, n: int, A: float, **kwargs) -> "ColeHopfSolution":
        return cls(n * np.pi / domain_length, A, domain_length, n, **kwargs)

    @property
    def c(self) -> float:
        return 2.0 * self.viscosity if self.coefficient is None else self.coefficient

    @property
    def pde_nonlinear_factor(self) -> float:
        """Factor ``g`` for which ``u_t - nu u_xx + g u u_x = 0`` holds."""
        return 2.0 * self.viscosity / self.c

    def phi(self, x, t):
        x, t = np.asarray(x, float), np.asarray(t, float)
        return np.exp(-self.viscosity * self.a**2 * t) * np.sin(self.a * x) + self.A

    def derivatives(self, x, t):
        """Return ``(u, u_x, u_t, u_xx)``."""
        x, t = np.asarray(x, float), np.asarray(t, float)
        a, nu, c = self.a, self.viscosity, self.c
        e = np.exp(-nu * a**2 * t)
        s, co = np.sin(a * x), np.cos(a * x)
        phi = e * s + self.A
        phi_x = a * e * co
        phi_xx = -a**2 * e * s
        phi_xxx = -a**3 * e * co
        phi_t = nu * phi_xx
        phi_xt = nu * phi_xxx
        u = -c * phi_x / phi
        u_x = -c * (phi_xx * phi - phi_x**2) / phi**2
        u_t = -c * (phi_xt * phi - phi_x * phi_t) / phi**2
        u_xx = -c * (phi_xxx / phi - 3 * phi_x * phi_xx / phi**2 + 2 * phi_x**3 / phi**3)
        return u, u_x, u_t, u_xx

    def evaluate(self, x, t):
        """Return ``(u, u_x, u_t)`` at ``(x, t)``."""
        return self.derivatives(x, t)[:3]

    def u(self, x, t):
        return self.derivatives(x, t)[0]

    def pde_residual(self, x, t):
        u, u_x, u_t, u_xx = self.derivatives(x, t)
        return u_t - self.viscosity * u_xx + self.pde_nonlinear_factor * u * u_x

    def lateral_traces(self, t):
        """Dirichlet and Neumann data at ``x = 0``."""
        u, u_x, *_ = self.derivatives(0.0, t)
        return u, u_x

    def endpoint_trace(self, t):
        """Value at the right end ``x = domain_length``."""
        return self.derivatives(self.domain_length, t)[0]


def counterexample_pair(ell: float = 1.0, n: int = 1, k: int = 2, A: float = 2.0,
                        L: float | None = None, **kwargs):
    """Two modes on ``(0, ell)`` and ``(0, L)`` with ``a = n pi/ell = k pi/L``.

    ``L`` defaults to ``k ell / n``; passing an inconsistent ``L`` raises.
    """
    if int(n) != n or int(k) != k or n < 1 or k < 1:
        raise ValueError("n and k must be positive integers")
    if n == k:
        raise ValueError("n and k must differ")
    if not ell > 0:
        raise ValueError("ell must be positive")
    L_expected = k * ell / n
    if L is None:
        L = L_expected
    elif not np.isclose(L, L_expected, rtol=1e-14, atol=0.0):
        raise ValueError(f"inconsistent lengths: n*pi/ell != k*pi/L (need L = {L_expected})")
    if not ell < L:
        raise ValueError("need ell < L, i.e. k > n")
    a = n * np.pi / ell
    first = ColeHopfSolution(a, A, ell, n, **kwargs)
    second = ColeHopfSolution(a, A, L, k, **kwargs)
    return first, second


@dataclass
class ManufacturedCase:
    u: Callable
    u_x: Callable
    u_t: Callable
    u_xx: Callable
    viscosity: float = 1.0

    def forcing(self, x, t):
        return self.u_t(x, t) - self.viscosity * self.u_xx(x, t) + self.u(x, t) * self.u_x(x, t)


def manufactured_forcing(u: Callable, u_x: Callable, u_t: Callable, u_xx: Callable,
                         viscosity: float = 1.0) -> ManufacturedCase:
    return ManufacturedCase(u, u_x, u_t, u_xx, viscosity)


def manufactured_from_cole_hopf(sol: ColeHopfSolution) -> ManufacturedCase:
    return ManufacturedCase(
        lambda x, t: sol.derivatives(x, t)[0],
        lambda x, t: sol.derivatives(x, t)[1],
        lambda x, t: sol.derivatives(x, t)[2],
        lambda x, t: sol.derivatives(x, t)[3],
        sol.viscosity,
    )
