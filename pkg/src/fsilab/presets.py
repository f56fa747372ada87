"""Named closed-form signals used by configs and tests.

A preset is a small dict such as ``{"kind": "decay", "offset": 0.05,
"amplitude": -0.05, "rate": 5}``; :func:`build_signal` turns it into a
vectorized callable.  The same presets serve as scalar boundary data (in
``t``) and as initial fluid velocities (in ``x``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .cole_hopf import ColeHopfSolution


class PresetError(ValueError):
    pass


@dataclass(frozen=True)
class SignalPreset:
    kind: str
    params: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, entry) -> "SignalPreset":
        if isinstance(entry, (int, float)):
            return cls("const", {"value": float(entry)})
        if not isinstance(entry, dict) or "kind" not in entry:
            raise PresetError(f"signal preset needs a 'kind' entry, got {entry!r}")
        params = {k: v for k, v in entry.items() if k != "kind"}
        return cls(str(entry["kind"]), params)

    def build(self) -> Callable:
        return build_signal(self)


def _get(params, name, default=None):
    if name in params:
        return float(params[name])
    if default is None:
        raise PresetError(f"preset parameter '{name}' is required")
    return float(default)


def build_signal(preset: SignalPreset | dict) -> Callable:
    if not isinstance(preset, SignalPreset):
        preset = SignalPreset.from_dict(preset)
    kind, prm = preset.kind, preset.params
    if kind == "zero":
        return lambda s: np.zeros_like(np.asarray(s, dtype=float))
    if kind == "const":
        v = _get(prm, "value")
        return lambda s: np.full_like(np.asarray(s, dtype=float), v)
    if kind == "sine":
        off, amp = _get(prm, "offset", 0.0), _get(prm, "amplitude")
        freq, phase = _get(prm, "frequency", 1.0), _get(prm, "phase", 0.0)
        return lambda s: off + amp * np.sin(2.0 * np.pi * freq * np.asarray(s, dtype=float) + phase)
    if kind == "odd_sine":
        # sin(mode pi x): odd in x and zero at x = +-1
        amp, mode = _get(prm, "amplitude"), _get(prm, "mode", 1.0)
        return lambda s: amp * np.sin(mode * np.pi * np.asarray(s, dtype=float))
    if kind == "decay":
        off, amp, rate = _get(prm, "offset", 0.0), _get(prm, "amplitude"), _get(prm, "rate")
        return lambda s: off + amp * np.exp(-rate * np.asarray(s, dtype=float))
    if kind == "poly":
        coeffs = np.asarray(prm.get("coefficients", ()), dtype=float)
        if coeffs.size == 0:
            raise PresetError("poly preset needs 'coefficients' (constant term first)")
        return lambda s: np.polynomial.polynomial.polyval(np.asarray(s, dtype=float), coeffs)
    if kind == "sum":
        parts = [build_signal(p) for p in prm.get("terms", ())]
        if not parts:
            raise PresetError("sum preset needs 'terms'")
        return lambda s: sum(f(s) for f in parts)
    if kind == "colehopf":
        sol = ColeHopfSolution(_get(prm, "a", np.pi), _get(prm, "A", 2.0),
                               viscosity=_get(prm, "viscosity", 1.0))
        x = _get(prm, "x", 0.0)
        return lambda s: sol.u(x, np.asarray(s, dtype=float))
    raise PresetError(f"unknown signal kind {kind!r}")


def bump_initial_velocity(q0: float, q1: float, alpha0: float, eta0: float,
                          base: float = 0.0, width: float = 0.3) -> Callable:
    """A smooth ``w0`` meeting the three compatibility conditions exactly.

    ``w0 = l(x) + base (1 - x^2) + c b(x)`` with ``l`` the linear interpolant
    of ``(alpha0, eta0)`` and ``b`` a bump with ``b(+-1) = 0``, ``b(q0) = 1``.
    """
    if not abs(q0) < 1:
        raise PresetError("bump preset needs |q0| < 1")

    def lin(x):
        return 0.5 * alpha0 * (1.0 - x) + 0.5 * eta0 * (1.0 + x)

    c = q1 - lin(q0) - base * (1.0 - q0**2)

    def w0(x):
        x = np.asarray(x, dtype=float)
        b = ((1.0 - x**2) / (1.0 - q0**2)) ** 2 * np.exp(-(((x - q0) / width) ** 2))
        return lin(x) + base * (1.0 - x**2) + c * b

    return w0


def build_initial_velocity(entry, q0: float, q1: float, alpha0: float, eta0: float) -> Callable:
    """``w0`` from a preset; ``kind: bump`` is assembled to be compatible."""
    if isinstance(entry, dict) and entry.get("kind") == "bump":
        return bump_initial_velocity(q0, q1, alpha0, eta0, float(entry.get("base", 0.0)),
                                     float(entry.get("width", 0.3)))
    return build_signal(entry)
