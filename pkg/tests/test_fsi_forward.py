import dataclasses

import numpy as np
import pytest

from conftest import Q0, smooth_problem
from fsilab.convergence import coupled_self_convergence
from fsilab.fsi_forward import (FsiProblem, InterfaceMarginError, ProblemError, check_jump_consistency,
                                extract_observation, sample_signal, solve_forward, solve_prescribed)
from fsilab.geometry import InterfaceTrajectory
from fsilab.presets import build_signal, bump_initial_velocity

zero = build_signal({"kind": "zero"})


def test_sample_signal_forms():
    t = np.linspace(0, 1, 5)
    np.testing.assert_array_equal(sample_signal(2.0, t), np.full(5, 2.0))
    np.testing.assert_array_equal(sample_signal(lambda s: s**2, t), t**2)
    np.testing.assert_array_equal(sample_signal(t, t), t)
    with pytest.raises(ProblemError):
        sample_signal(np.zeros(3), t)


def test_rest_state_is_an_equilibrium():
    sol = solve_forward(FsiProblem(zero, zero, zero, 0.3, 0.0, n_steps=128, n_cells_left=16, n_cells_right=16))
    assert np.all(sol.traj.p == 0.3)
    assert np.all(sol.left.history() == 0) and np.all(sol.right.history() == 0)
    assert np.all(sol.traces.beta == 0) and np.all(sol.traces.jump == 0)


def test_odd_data_keeps_particle_at_origin():
    w0 = build_signal({"kind": "odd_sine", "amplitude": 0.2})
    a = build_signal({"kind": "sine", "amplitude": -0.1})
    e = build_signal({"kind": "sine", "amplitude": 0.1})
    sol = solve_forward(FsiProblem(w0, a, e, 0.0, 0.0, n_steps=128, n_cells_left=32, n_cells_right=32))
    assert np.max(np.abs(sol.traj.p)) <= 1e-12
    # reflection maps the left field onto minus the right one
    np.testing.assert_allclose(sol.left.history(), -sol.right.history()[:, ::-1], atol=1e-12)


@pytest.mark.parametrize("change,match", [
    (dict(q1=0.5), "w0\\(q0\\) = q1"),
    (dict(eta=0.3), "w0\\(1\\) = eta\\(0\\)"),
    (dict(q0=0.95), "1 - delta"),
    (dict(n_steps=4), "CFL"),
])
def test_validation_rejects(change, match):
    with pytest.raises(ProblemError, match=match):
        solve_forward(dataclasses.replace(smooth_problem(), **change))


def test_kinematic_condition_holds_at_interface_nodes():
    sol = solve_forward(smooth_problem())
    left, right = sol.left.history(), sol.right.history()
    np.testing.assert_array_equal(left[:, -1], sol.traj.p_dot)
    np.testing.assert_array_equal(right[:, 0], sol.traj.p_dot)
    np.testing.assert_array_equal(left[:, 0], sol.problem.alpha_values())


def test_newton_law_is_satisfied_discretely():
    sol = solve_forward(smooth_problem())
    assert check_jump_consistency(sol) < 1e-9
    assert sol.complete
    passes = sol.meta["coupling_passes"]
    assert passes.min() >= 1 and passes.max() <= sol.problem.coupling_iters


def test_prescribed_replay_reproduces_observation():
    prob = smooth_problem()
    sol = solve_forward(prob)
    replay = solve_prescribed(prob, sol.traj)
    a1, b1 = extract_observation(sol)
    a2, b2 = extract_observation(replay)
    np.testing.assert_array_equal(a1, a2)
    assert np.max(np.abs(b1 - b2)) <= 1e-10
    assert np.max(np.abs(replay.jump_defect()[1:])) < 1e-8


def test_prescribed_rejects_mismatched_grid():
    prob = smooth_problem()
    traj = InterfaceTrajectory.constant(dataclasses.replace(prob, n_steps=64).grid, Q0)
    with pytest.raises(ProblemError):
        solve_prescribed(prob, traj)


def test_margin_violation_returns_partial_solution():
    q0, q1 = 0.85, 0.5
    w0 = bump_initial_velocity(q0, q1, 0.0, 0.0, width=0.2)
    prob = FsiProblem(w0, zero, zero, q0, q1, n_steps=1024, n_cells_left=32, n_cells_right=32)
    with pytest.raises(InterfaceMarginError, match="interface-margin violation") as info:
        solve_forward(prob)
    partial = info.value.partial
    assert partial is not None and not partial.complete
    level = info.value.level
    assert np.all(np.isfinite(partial.traj.p[:level]))
    assert np.all(np.isnan(partial.traj.p[level + 1:]))


def test_single_coupling_pass_is_second_order_in_time():
    ladder = coupled_self_convergence(smooth_problem(coupling_iters=1), [16, 32, 64], 8)
    assert ladder.min_order >= 1.5
