import copy
import json

import numpy as np
import pytest
import yaml
from hypothesis import given, settings, strategies as st

from fsilab import io
from fsilab.cli import main
from fsilab.config import ConfigError, config_from_dict

DECAY = {"kind": "decay", "offset": 0.05, "amplitude": -0.05, "rate": 5.0}
SMOOTH = {
    "problem": {"T": 1.0, "q0": 0.1, "q1": 0.02, "w0": {"kind": "bump", "base": 0.05, "width": 0.3},
                "alpha": DECAY, "eta": DECAY},
    "discretization": {"n_cells_left": 16, "n_cells_right": 16, "n_steps": 64},
}
ZERO = {
    "problem": {"T": 1.0, "q0": 0.2, "q1": 0.0, "w0": {"kind": "zero"}, "alpha": {"kind": "zero"},
                "eta": {"kind": "zero"}},
    "discretization": {"n_cells_left": 16, "n_cells_right": 16, "n_steps": 64},
}
P_TWIN = copy.deepcopy(SMOOTH)
P_TWIN["problem"]["q1"] = 0.05 * np.pi
P_TWIN["inverse"] = {"unknowns": "p", "p_true": {"kind": "sine", "offset": 0.1, "amplitude": 0.05, "frequency": 0.5},
                     "p_knots": 6, "mu_jump": 0.0}


def run(tmp_path, command, cfg, name="run", extra=()):
    path = tmp_path / f"{name}.yaml"
    path.write_text(yaml.safe_dump(cfg) if isinstance(cfg, dict) else cfg)
    out = tmp_path / name
    code = main([command, "--config", str(path), "--out", str(out), *extra])
    return code, out


def summary(out):
    return json.loads((out / "summary.json").read_text())


def test_forward_zero_preset(tmp_path):
    code, out = run(tmp_path, "forward", ZERO)
    assert code == 0
    cols = io.read_csv(out / "trace.csv", io.TRACE_HEADER)
    for name in ("alpha", "beta", "eta"):
        assert np.all(cols[name] == 0.0)
    assert np.all(cols["p"] == 0.2)
    assert summary(out)["partial"] is False


def test_forward_odd_preset(tmp_path):
    cfg = copy.deepcopy(ZERO)
    cfg["problem"].update(q0=0.0, w0={"kind": "odd_sine", "amplitude": 0.1},
                          alpha={"kind": "sine", "amplitude": -0.05}, eta={"kind": "sine", "amplitude": 0.05})
    code, out = run(tmp_path, "forward", cfg)
    assert code == 0 and summary(out)["max_abs_p_minus_q0"] <= 1e-8


def test_missing_key_is_named(tmp_path, capsys):
    cfg = copy.deepcopy(SMOOTH)
    del cfg["problem"]["T"]
    code, _ = run(tmp_path, "forward", cfg)
    assert code == 2
    assert "problem.T" in capsys.readouterr().err


@pytest.mark.parametrize("text,needle", [
    ("problem: [1, 2\n", "line"),
    (yaml.safe_dump({**SMOOTH, "problme": {}}), "problme"),
    (yaml.safe_dump({**SMOOTH, "discretization": {"n_steps": 0}}), "n_steps"),
    (yaml.safe_dump({**SMOOTH, "problem": {**SMOOTH["problem"], "w0": {"kind": "nope"}}}), "nope"),
    (yaml.safe_dump({**SMOOTH, "problem": {**SMOOTH["problem"], "q1": 0.5, "w0": {"kind": "zero"}}}), "q1"),
])
def test_config_errors_exit_2(tmp_path, capsys, text, needle):
    code, _ = run(tmp_path, "forward", text)
    assert code == 2
    assert needle in capsys.readouterr().err


def test_solver_abort_writes_partial_output(tmp_path):
    cfg = copy.deepcopy(ZERO)
    cfg["problem"].update(q0=0.85, q1=0.5, w0={"kind": "bump", "width": 0.2})
    cfg["discretization"].update(n_cells_left=32, n_cells_right=32, n_steps=1024)
    code, out = run(tmp_path, "forward", cfg)
    assert code == 3
    s = summary(out)
    assert s["partial"] is True and s["abort_reason"] == "interface-margin violation"
    cols = io.read_csv(out / "trace.csv", io.TRACE_HEADER)
    assert np.isnan(cols["p"][-1]) and np.isfinite(cols["p"][0])


def test_oracle_default_and_rejection(tmp_path):
    code, out = run(tmp_path, "oracle", {"oracle": {"n_samples": 51}})
    assert code == 0
    s = summary(out)
    assert s["cauchy_discrepancy"] <= 1e-15
    assert s["endpoint_min_discrepancy"] > 0
    assert s["endpoint_values_t0"] == pytest.approx([np.pi, -np.pi])
    code, out = run(tmp_path, "oracle", {"oracle": {"coefficient": 1.0}}, name="unit")
    assert summary(out)["endpoint_values_t0"] == pytest.approx([np.pi / 2, -np.pi / 2])
    code, _ = run(tmp_path, "oracle", {"oracle": {"n": 2, "k": 2}}, name="bad")
    assert code == 2


def test_inverse_truth_init(tmp_path):
    cfg = copy.deepcopy(P_TWIN)
    cfg["inverse"]["init"] = "truth"
    code, out = run(tmp_path, "inverse", cfg)
    assert code == 0
    s = summary(out)
    assert s["iterations"] <= 2 and s["final_objective"] < 1e-15
    hist = io.read_csv(out / "history.csv", ("iter", "objective"))
    assert hist["objective"][-1] == s["final_objective"]


def test_inverse_from_trace_file(tmp_path):
    code, fwd = run(tmp_path, "forward", SMOOTH, name="fwd")
    assert code == 0
    cfg = copy.deepcopy(SMOOTH)
    cfg["inverse"] = {"unknowns": "eta", "data_path": str(fwd / "trace.csv"), "eta_knots": 5, "max_iter": 3}
    code, out = run(tmp_path, "inverse", cfg, name="inv")
    assert code == 0 and summary(out)["mode"] == "data"
    bad = tmp_path / "bad.csv"
    bad.write_text("t,alpha,beta\n0,0,0\n")
    cfg["inverse"]["data_path"] = str(bad)
    code, _ = run(tmp_path, "inverse", cfg, name="inv_bad")
    assert code == 2
    cfg["discretization"]["n_steps"] = 128
    cfg["inverse"]["data_path"] = str(fwd / "trace.csv")
    code, _ = run(tmp_path, "inverse", cfg, name="inv_grid")
    assert code == 2


def test_inverse_twin_requires_truth(tmp_path):
    cfg = copy.deepcopy(SMOOTH)
    cfg["inverse"] = {"unknowns": "eta"}
    code, _ = run(tmp_path, "inverse", cfg)
    assert code == 2


def test_sweep_is_identical_across_worker_counts(tmp_path, monkeypatch):
    cfg = copy.deepcopy(P_TWIN)
    cfg["sweep"] = {"eps": [1e-3, 0.0], "seeds": [0, 1]}
    monkeypatch.setenv("FSILAB_THREADS", "1")
    code, a = run(tmp_path, "sweep", cfg, name="a")
    assert code == 0
    monkeypatch.setenv("FSILAB_THREADS", "2")
    code, b = run(tmp_path, "sweep", cfg, name="b")
    assert code == 0 and summary(b)["workers"] == 2
    for name in ("sweep.csv", "fit.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    rows = io.read_csv(a / "sweep.csv", ("eps", "seed", "err_p", "err_eta", "misfit", "iters", "converged"))
    assert list(rows["eps"]) == [0.0, 0.0, 1e-3, 1e-3] and list(rows["seed"]) == [0, 1, 0, 1]
    monkeypatch.setenv("FSILAB_THREADS", "zero")
    code, _ = run(tmp_path, "sweep", cfg, name="c")
    assert code == 2


def test_sweep_zero_noise_row_matches_inverse(tmp_path, monkeypatch):
    cfg = copy.deepcopy(P_TWIN)
    cfg["sweep"] = {"eps": [0.0], "seeds": [0]}
    monkeypatch.setenv("FSILAB_THREADS", "1")
    _, sw = run(tmp_path, "sweep", cfg, name="sw")
    _, inv = run(tmp_path, "inverse", cfg, name="inv")
    row = io.read_csv(sw / "sweep.csv")
    assert row["err_p"][0] == summary(inv)["err_p"]
    assert row["iters"][0] == summary(inv)["iterations"]


def test_convergence_small_ladder(tmp_path):
    cfg = copy.deepcopy(SMOOTH)
    cfg["convergence"] = {"n_cells": [16, 32, 64], "time_cells": 256, "time_steps": [8, 16, 32],
                          "coupled_cells": [16, 32, 64]}
    code, out = run(tmp_path, "convergence", cfg)
    assert code == 0
    s = summary(out)
    assert s["min_order_space"] > 1.8 and s["min_order_time"] > 1.8 and s["min_order_coupled"] > 1.5
    table = io.read_csv(out / "convergence.csv", numeric=False)
    assert set(table["ladder"]) == {"space", "time", "coupled"}


def test_plotscript_is_emitted(tmp_path):
    code, out = run(tmp_path, "oracle", {"oracle": {}}, extra=("--emit-plotscript",))
    assert code == 0
    compile((out / "plot.py").read_text(), "plot.py", "exec")


def test_forward_is_byte_deterministic(tmp_path):
    _, a = run(tmp_path, "forward", SMOOTH, name="a")
    _, b = run(tmp_path, "forward", SMOOTH, name="b")
    assert (a / "trace.csv").read_bytes() == (b / "trace.csv").read_bytes()


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=1, max_size=20))
@settings(max_examples=50, deadline=None)
def test_csv_round_trip_is_exact(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("rt") / "x.csv"
    io.write_columns(path, {"a": np.asarray(values), "b": np.arange(len(values))})
    back = io.read_csv(path, ("a", "b"))
    np.testing.assert_array_equal(back["a"], values)


def test_config_defaults_and_types():
    cfg = config_from_dict({"oracle": {"n": 3.0}})
    assert cfg.oracle.n == 3 and cfg.output.precision == 17
    with pytest.raises(ConfigError, match="oracle.n"):
        config_from_dict({"oracle": {"n": "three"}})
    with pytest.raises(ConfigError, match="problem"):
        config_from_dict({}).build_problem()
