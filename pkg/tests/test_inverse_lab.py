import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import fsilab.inverse_lab.reconstruction as rec
from conftest import eta_true, p_true, sine_path_problem, smooth_problem
from fsilab.cole_hopf import ColeHopfSolution
from fsilab.fsi_forward import solve_forward
from fsilab.inverse_lab.experiments import (anchor_experiment, anchor_ratios, fit_log_rate, interior_trace_norm,
                                            stability_sweep, sweep_row, trace_estimate_experiment)
from fsilab.inverse_lab.lm import fd_jacobian, levenberg_marquardt
from fsilab.inverse_lab.reconstruction import (NoiseModel, Parametrization, ReconstructionProblem, make_twin,
                                               objective, observation_operator, reconstruct, residual_vector,
                                               sup_error)
from fsilab.inverse_lab.splines import SplineBasis


# ----------------------------------------------------------------------------- splines

def test_spline_reproduces_cubics_and_derivatives():
    t = np.linspace(0, 2, 101)
    b = SplineBasis(2.0, 5, t)
    f = 1 - t + 0.5 * t**2 - 0.2 * t**3
    c = b.project(f)
    np.testing.assert_allclose(b.value(c), f, atol=1e-12)
    np.testing.assert_allclose(b.d1(c), -1 + t - 0.6 * t**2, atol=1e-11)
    np.testing.assert_allclose(b.d2(c), 1 - 1.2 * t, atol=1e-10)


def test_spline_pins_set_initial_value_and_slope():
    t = np.linspace(0, 1, 65)
    b = SplineBasis(1.0, 6, t)
    c = b.project_pinned(np.sin(t), {0: 0.3, 1: 0.3 + 2.0 * b.spacing / 3})
    assert b.value(c)[0] == pytest.approx(0.3, abs=1e-14)
    assert b.d1(c)[0] == pytest.approx(2.0, abs=1e-12)
    with pytest.raises(ValueError):
        SplineBasis(1.0, 3, t)


# ----------------------------------------------------------------------------- noise

@given(amp=st.floats(0, 1), seed=st.integers(0, 10_000), kind=st.sampled_from(["gaussian", "uniform"]))
@settings(max_examples=30)
def test_noise_is_reproducible(amp, seed, kind):
    beta = np.linspace(0, 1, 33)
    a = NoiseModel(kind, amp, seed).apply(beta)
    b = NoiseModel(kind, amp, seed).apply(beta)
    np.testing.assert_array_equal(a, b)
    if kind == "uniform":
        assert np.max(np.abs(a - beta)) <= amp
    if amp == 0:
        np.testing.assert_array_equal(a, beta)


def test_noise_rejects_bad_input():
    with pytest.raises(ValueError):
        NoiseModel("laplace", 0.1, 0)
    with pytest.raises(ValueError):
        NoiseModel("gaussian", -0.1, 0)


# ----------------------------------------------------------------------------- LM

def test_lm_solves_linear_least_squares():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((30, 4))
    b = rng.standard_normal(30)
    res = levenberg_marquardt(lambda x: A @ x - b, np.zeros(4))
    np.testing.assert_allclose(res.x, np.linalg.lstsq(A, b, rcond=None)[0], atol=1e-6)
    assert res.converged
    assert all(h1 <= h0 for h0, h1 in zip(res.history, res.history[1:]))


def test_lm_respects_box_and_flags_nonconvergence():
    fun = lambda x: np.array([x[0] - 2.0, 10 * (x[1] - x[0] ** 2)])
    res = levenberg_marquardt(fun, np.zeros(2), lower=np.array([-1.0, -1.0]), upper=np.array([1.0, 1.0]))
    assert np.all(np.abs(res.x) <= 1.0)
    assert res.x[0] == pytest.approx(1.0)
    res = levenberg_marquardt(fun, np.zeros(2), max_iter=1)
    assert not res.converged and res.reason == "max_iter"


def test_lm_jacobian_failure_is_reported_not_raised():
    fun = lambda x: np.array([1.0, 1.0]) if np.all(x == 0) else None
    res = levenberg_marquardt(fun, np.zeros(1))
    assert not res.converged and res.reason == "jacobian evaluation failed"
    res = levenberg_marquardt(lambda x: None, np.zeros(1))
    assert res.unidentifiable and res.cost == np.inf


def test_lm_failed_trials_flag_unidentifiable():
    state = {"n": 0}

    def fun(x):
        state["n"] += 1
        if state["n"] <= 2:  # initial point and its Jacobian column
            return np.array([x[0] - 1.0])
        return None

    res = levenberg_marquardt(fun, np.zeros(1), max_iter=5)
    assert res.unidentifiable and not res.converged


# ----------------------------------------------------------------------------- observation & objective

@pytest.fixture(scope="module")
def eta_twin():
    return make_twin(smooth_problem(16, 64), "eta", eta_true=eta_true, eta_knots=6)


@pytest.fixture(scope="module")
def p_twin():
    return make_twin(sine_path_problem(16, 64), "p", p_true=p_true, p_knots=6, mu_jump=0.0)


def test_truth_candidate_reproduces_recorded_beta(eta_twin):
    prob = eta_twin.problem
    _, eta = Parametrization(prob).decode(eta_twin.x_true)
    independent = solve_forward(dataclasses.replace(prob.base, eta=eta))
    obs = observation_operator(eta_twin.x_true, prob)
    assert np.max(np.abs(obs.beta - independent.traces.beta)) <= 1e-10
    assert objective(eta_twin.x_true, prob) <= 1e-18


def test_shifted_path_has_positive_misfit(p_twin):
    prob = p_twin.problem
    param = Parametrization(prob)
    pc, _ = param.full_coefficients(p_twin.x_true)
    shifted = param.free_vector(pc + 0.05)
    assert objective(shifted, prob) > 1e-12


def test_box_violation_returns_sentinel_without_solve(p_twin, monkeypatch):
    def boom(*a, **k):
        raise AssertionError("solver launched")

    monkeypatch.setattr(rec, "solve_prescribed", boom)
    prob = p_twin.problem
    x = np.full(Parametrization(prob).size, 0.95)
    obs = observation_operator(x, prob)
    assert obs.failed and "1 - delta" in obs.reason
    assert objective(x, prob) == rec.SENTINEL


def test_objective_at_truth_equals_penalty(p_twin):
    prob = dataclasses.replace(p_twin.problem, lambda_p=1e-3)
    param = Parametrization(prob)
    traj, _ = param.decode(p_twin.x_true)
    penalty = 0.5 * 1e-3 * prob.base.grid.dt * np.sum(traj.p_ddot**2)
    assert penalty > 0
    assert objective(p_twin.x_true, prob) == pytest.approx(penalty, rel=1e-12, abs=1e-20)


def test_zero_candidate_has_positive_objective(eta_twin):
    prob = eta_twin.problem
    assert objective(np.zeros(Parametrization(prob).size), prob) > 0


def test_truth_init_stops_immediately(eta_twin, p_twin):
    for twin in (eta_twin, p_twin):
        res = reconstruct(twin.problem, init=twin.x_true)
        assert res.iterations <= 2 and res.history[-1] < 1e-15 and res.converged


def half_step_mismatch(twin, x=None):
    prob = twin.problem
    param = Parametrization(prob)
    f = lambda v: residual_vector(v, prob, param)
    x = param.default_init() + 0.01 if x is None else x
    r = f(x)
    J1 = fd_jacobian(f, x, r, rel_step=1e-6, abs_floor=1e-8)
    J2 = fd_jacobian(f, x, r, rel_step=5e-7, abs_floor=5e-9)
    norms = np.linalg.norm(J1, axis=0)
    return np.linalg.norm(J1 - J2, axis=0) / norms, norms


def test_jacobian_is_step_size_stable(p_twin):
    rel, _ = half_step_mismatch(p_twin, p_twin.x_true)
    assert np.max(rel) < 1e-3


def test_jacobian_resolved_columns_are_step_size_stable(eta_twin):
    # the coefficient of the last knot barely reaches x = -1 before T; its
    # column sits at roundoff level for a 1e-8 step and is excluded here
    rel, norms = half_step_mismatch(eta_twin)
    resolved = norms >= 1e-3 * norms.max()
    assert resolved.sum() >= len(norms) - 1
    assert np.max(rel[resolved]) < 1e-3


def test_inverse_crime_error_shrinks_with_regularization():
    errs = []
    base = sine_path_problem(16, 64)
    t = base.grid.t
    for lam in (1e-6, 1e-8):
        twin = make_twin(base, "p", p_true=p_true, p_knots=6, mu_jump=0.0, lambda_p=lam)
        res = reconstruct(twin.problem)
        errs.append(sup_error(res.p_hat.p, twin.truth.traj.p, t, 0.1))
    assert errs[1] <= 0.5 * errs[0]


def test_p_twin_reconstruction(p_twin):
    res = reconstruct(p_twin.problem)
    t = p_twin.problem.base.grid.t
    assert res.converged
    assert sup_error(res.p_hat.p, p_true(t), t, 0.1) <= 1e-2
    assert np.max(np.abs(res.p_hat.p)) <= 0.9


def test_reconstruct_rejects_wrong_init_size(eta_twin):
    with pytest.raises(ValueError):
        reconstruct(eta_twin.problem, init=np.zeros(2))


def test_problem_validation(eta_twin):
    prob = eta_twin.problem
    with pytest.raises(ValueError):
        dataclasses.replace(prob, eta_knots=3)
    with pytest.raises(ValueError):
        dataclasses.replace(prob, lambda_eta=-1.0)
    with pytest.raises(ValueError):
        dataclasses.replace(prob, observed_beta=np.full_like(prob.observed_beta, np.nan))


# ----------------------------------------------------------------------------- experiments

def test_interior_trace_norm_closed_forms():
    T = 0.7
    t = np.linspace(0, T, 71)
    y = np.linspace(0, 1, 21)
    assert interior_trace_norm(np.zeros((71, 21)), (0.5, 1.0), t=t, coords=y) == 0.0
    lin = np.tile(y, (71, 1))
    assert interior_trace_norm(lin, (0.5, 1.0), t=t, coords=y) == pytest.approx(2 * np.sqrt(T), rel=1e-12)
    with pytest.raises(ValueError):
        interior_trace_norm(lin, (1.5, 2.0), t=t, coords=y)


def test_interior_trace_norm_shrinks_with_window():
    sol = ColeHopfSolution(np.pi, 2.0)
    t = np.linspace(0, 1, 201)
    x = np.linspace(0, 1, 41)
    u = sol.u(x[None, :], t[:, None])
    vals = [interior_trace_norm(u, (0.0, 0.5), (eps, 1.0), coordinate="xstar", t=t, coords=x)
            for eps in (0.0, 0.1, 0.3)]
    assert np.all(np.isfinite(vals)) and vals[0] > vals[1] > vals[2]


def test_fit_log_rate_recovers_model():
    eps = np.array([1e-1, 1e-2, 1e-3, 1e-4])
    fit = fit_log_rate(eps, 3.0 / np.log(1 / eps) ** 1.5)
    assert fit.K == pytest.approx(3.0) and fit.theta == pytest.approx(1.5) and fit.residual < 1e-12
    assert np.isnan(fit_log_rate([0.1], [1.0]).theta)


def test_anchor_ratios_skip_identical_runs():
    t = np.linspace(0, 1, 11)
    ratios, sup = anchor_ratios(np.ones(11), np.ones(11), t, [0.2, 0.5])
    assert sup == 0 and np.all(np.isnan(ratios))


def test_anchor_experiment_identical_and_perturbed():
    prob = smooth_problem(16, 64)
    same = anchor_experiment(prob, second=prob)
    assert not np.any(same.valid)
    rep = anchor_experiment(prob, dq0=1e-3)
    assert np.all(rep.valid) and np.isfinite(rep.R0) and rep.spread <= 10


def test_trace_estimate_echoes_uniqueness():
    prob = smooth_problem(16, 64)
    sol = solve_forward(prob)
    rep = trace_estimate_experiment(prob, sol.traj, [0.0, 1e-3, 1e-2], knots=6)
    assert rep.discrepancy[0] <= 1e-10
    assert rep.discrepancy[2] >= 0.95 * rep.discrepancy[1] > 0
    with pytest.raises(ValueError):
        trace_estimate_experiment(prob, sol.traj, [1.0])


def test_sweep_is_sorted_reproducible_and_degenerates_to_twin(p_twin):
    kwargs = dict(eps_list=[1e-2, 0.0], seeds=[1, 0], twin=p_twin)
    base = p_twin.problem.base
    a = stability_sweep(base, **kwargs)
    b = stability_sweep(base, **kwargs)
    assert [(r.eps, r.seed) for r in a.rows] == [(0.0, 0), (0.0, 1), (1e-2, 0), (1e-2, 1)]
    assert [r.as_tuple() for r in a.rows] == [r.as_tuple() for r in b.rows]
    direct = reconstruct(p_twin.problem)
    t = base.grid.t
    assert a.rows[0].err_p == sup_error(direct.p_hat.p, p_twin.truth.traj.p, t, 0.1)
    assert a.rows[0].err_p <= 1e-2


def test_sweep_row_records_failures(p_twin, monkeypatch):
    def fail(*a, **k):
        raise ValueError("boom")

    monkeypatch.setattr("fsilab.inverse_lab.experiments.reconstruct", fail)
    row = sweep_row(p_twin, 1e-3, 0)
    assert not row.converged and np.isnan(row.err_p)
