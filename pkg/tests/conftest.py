import numpy as np
import pytest

from fsilab.fsi_forward import FsiProblem
from fsilab.presets import build_signal, bump_initial_velocity

Q0, Q1 = 0.1, 0.02
DECAY = {"kind": "decay", "offset": 0.05, "amplitude": -0.05, "rate": 5.0}


def eta_true(t):
    t = np.asarray(t, dtype=float)
    return 0.05 * (1 - np.exp(-5 * t)) + 0.03 * np.sin(2 * np.pi * t)


def p_true(t):
    return 0.1 + 0.05 * np.sin(np.pi * np.asarray(t, dtype=float))


def smooth_problem(n_cells=32, n_steps=128, q1=Q1, **kwargs):
    """Compatible smooth data: bump initial velocity, decaying boundary data."""
    alpha = build_signal(DECAY)
    w0 = bump_initial_velocity(Q0, q1, 0.0, 0.0, base=0.05, width=0.3)
    return FsiProblem(w0, alpha, alpha, Q0, q1, n_steps=n_steps, n_cells_left=n_cells,
                      n_cells_right=n_cells, **kwargs)


def sine_path_problem(n_cells=32, n_steps=128):
    """Data whose initial particle velocity matches p_true'(0)."""
    return smooth_problem(n_cells, n_steps, q1=0.05 * np.pi)


@pytest.fixture
def smooth():
    return smooth_problem()
