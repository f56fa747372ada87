"""``fsilab`` command line: forward, inverse, sweep, convergence, oracle.

Exit codes: 0 success, 2 configuration or data error, 3 solver abort.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .cole_hopf import ColeHopfSolution, counterexample_pair
from .config import ConfigError, RunConfig, config_from_dict, load_config
from .convergence import coupled_self_convergence, spatial_ladder, temporal_ladder
from .fsi_forward import ProblemError, SimulationAbort, check_jump_consistency, solve_forward
from .geometry import GeometryError
from .inverse_lab.experiments import (FIT_HEADER, SWEEP_HEADER, SweepReport, fit_sweep, sweep_row)
from .inverse_lab.reconstruction import (NoiseModel, ReconstructionProblem, Twin, make_twin, reconstruct,
                                         sup_error)
from .presets import PresetError

logger = logging.getLogger("fsilab")

EXIT_OK, EXIT_CONFIG, EXIT_ABORT = 0, 2, 3
DATA_ERRORS = (ConfigError, io.SchemaError, ProblemError, GeometryError, PresetError)


class CommandResult(dict):
    """Summary dict plus the exit code of the subcommand."""

    exit_code = EXIT_OK


def _out_dir(cfg: RunConfig, override: str | None) -> Path:
    d = Path(override) if override else Path(cfg.output.directory)
    d.mkdir(parents=True, exist_ok=True)
    return d


# ------------------------------------------------------------------------ forward

def cmd_forward(cfg: RunConfig, out: Path) -> CommandResult:
    problem = cfg.build_problem()
    prec = cfg.output.precision
    t0 = time.perf_counter()
    summary = CommandResult(command="forward")
    try:
        sol = solve_forward(problem)
        summary["partial"] = False
    except SimulationAbort as exc:
        summary.update(partial=True, abort_reason=exc.reason, abort_message=str(exc), abort_level=exc.level)
        summary.exit_code = EXIT_ABORT
        sol = exc.partial
        if sol is None:
            summary["wall_time"] = time.perf_counter() - t0
            io.write_json(out / "summary.json", summary)
            return summary
    wall = time.perf_counter() - t0
    io.write_trace(out / "trace.csv", sol, prec)
    p = sol.traj.p[np.isfinite(sol.traj.p)]
    summary.update(
        max_abs_p=float(np.max(np.abs(p))),
        max_abs_p_minus_q0=float(np.max(np.abs(p - problem.q0))),
        margin=float(1.0 - problem.delta - np.max(np.abs(p))),
        jump_defect=check_jump_consistency(sol),
        n_levels=int(p.size),
        wall_time=wall,
    )
    passes = sol.meta.get("coupling_passes") if sol.meta else None
    if passes is not None and len(passes):
        summary["mean_coupling_passes"] = float(np.mean(passes))
    io.write_json(out / "summary.json", summary)
    return summary


# ------------------------------------------------------------------------ inverse

def build_twin(cfg: RunConfig) -> Twin:
    base = cfg.build_problem()
    p_true, eta_true = cfg.truth_signals()
    unknowns = cfg.inverse.unknowns
    if "p" in unknowns.split("+") and p_true is None:
        raise ConfigError("missing required key 'inverse.p_true' for twin mode with unknown p")
    if "eta" in unknowns.split("+") and eta_true is None:
        raise ConfigError("missing required key 'inverse.eta_true' for twin mode with unknown eta")
    return make_twin(base, unknowns, p_true=p_true, eta_true=eta_true, **cfg.problem_kwargs())


def _load_observation(cfg: RunConfig, base):
    data = io.read_csv(cfg.inverse.data_path, io.TRACE_HEADER)
    t = base.grid.t
    if data["t"].shape != t.shape or np.max(np.abs(data["t"] - t)) > 1e-12:
        raise io.SchemaError(f"{cfg.inverse.data_path}: time column does not match the configured grid "
                             f"({data['t'].size} rows, grid has {t.size})")
    if not (np.all(np.isfinite(data["alpha"])) and np.all(np.isfinite(data["beta"]))):
        raise io.SchemaError(f"{cfg.inverse.data_path}: alpha/beta contain non-finite values")
    return data["alpha"], data["beta"]


def cmd_inverse(cfg: RunConfig, out: Path) -> CommandResult:
    inv = cfg.inverse
    prec = cfg.output.precision
    summary = CommandResult(command="inverse", unknowns=inv.unknowns)
    twin = None
    if inv.data_path:
        base = cfg.build_problem()
        alpha, beta = _load_observation(cfg, base)
        problem = ReconstructionProblem(base, alpha, beta, inv.unknowns, **cfg.problem_kwargs())
        summary["mode"] = "data"
    else:
        twin = build_twin(cfg)
        noise = NoiseModel(inv.noise.kind, inv.noise.amplitude, inv.noise.seed)
        problem = dataclasses.replace(twin.problem, observed_beta=noise.apply(twin.truth.beta))
        summary.update(mode="twin", noise_kind=noise.kind, noise_amplitude=noise.amplitude, noise_seed=noise.seed)
    if inv.init == "truth" and twin is None:
        raise ConfigError("inverse.init: 'truth' requires twin mode")
    init = twin.x_true if inv.init == "truth" else None
    t0 = time.perf_counter()
    res = reconstruct(problem, init=init)
    wall = time.perf_counter() - t0
    t = problem.base.grid.t
    cols = {"t": t}
    if res.p_hat is not None:
        cols["p_hat"] = res.p_hat.p
        cols["p_dot_hat"] = res.p_hat.p_dot
    cols["eta_hat"] = res.eta_hat if res.eta_hat is not None else problem.base.eta_values()
    cols["beta_obs"] = problem.observed_beta
    if res.observation is not None and res.observation.beta is not None:
        cols["beta_pred"] = res.observation.beta
    summary.update(iterations=res.iterations, converged=res.converged, unidentifiable=res.unidentifiable,
                   reason=res.reason, misfit=res.misfit,
                   final_objective=res.history[-1] if res.history else np.nan, wall_time=wall)
    if twin is not None:
        t_min = inv.t_frac * problem.base.T
        summary["t_min"] = t_min
        if twin.truth.traj is not None:
            cols["p_true"] = twin.truth.traj.p
            if res.p_hat is not None:
                summary["err_p"] = sup_error(res.p_hat.p, twin.truth.traj.p, t, t_min)
                summary["rel_err_p"] = sup_error(res.p_hat.p, twin.truth.traj.p, t, t_min, relative=True)
        if twin.truth.eta is not None:
            cols["eta_true"] = twin.truth.eta
            summary["err_eta"] = sup_error(cols["eta_hat"], twin.truth.eta, t, t_min)
            summary["rel_err_eta"] = sup_error(cols["eta_hat"], twin.truth.eta, t, t_min, relative=True)
    io.write_columns(out / "reconstruction.csv", cols, prec)
    io.write_csv(out / "history.csv", ("iter", "objective"), enumerate(res.history), prec)
    io.write_json(out / "summary.json", summary)
    return summary


# ------------------------------------------------------------------------ sweep

_TWIN_CACHE: dict[str, Twin] = {}


def _cached_twin(cfg_dict: dict) -> tuple[RunConfig, Twin]:
    key = json.dumps(cfg_dict, sort_keys=True, default=str)
    cfg = config_from_dict(cfg_dict)
    if key not in _TWIN_CACHE:
        _TWIN_CACHE[key] = build_twin(cfg)
    return cfg, _TWIN_CACHE[key]


def _sweep_task(args):
    cfg_dict, eps, seed = args
    cfg, twin = _cached_twin(cfg_dict)
    return sweep_row(twin, eps, seed, cfg.sweep.noise, cfg.sweep.eps_t_fraction)


def sweep_workers(n_tasks: int) -> int:
    raw = os.environ.get("FSILAB_THREADS")
    if raw is None or raw == "":
        cap = os.cpu_count() or 1
    else:
        try:
            cap = int(raw)
        except ValueError:
            raise ConfigError(f"FSILAB_THREADS must be a positive integer, got {raw!r}") from None
        if cap < 1:
            raise ConfigError(f"FSILAB_THREADS must be a positive integer, got {raw!r}")
    return max(1, min(cap, n_tasks))


def cmd_sweep(cfg: RunConfig, out: Path) -> CommandResult:
    sw = cfg.sweep
    prec = cfg.output.precision
    cfg_dict = cfg.to_dict()
    tasks = [(cfg_dict, float(e), int(s)) for e in sw.eps for s in sw.seeds]
    if not tasks:
        raise ConfigError("sweep.eps and sweep.seeds must be non-empty")
    # building the twin here surfaces config errors before any fan-out
    _, twin = _cached_twin(cfg_dict)
    workers = sweep_workers(len(tasks))
    t0 = time.perf_counter()
    if workers == 1:
        rows = [_sweep_task(a) for a in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_task, tasks))
    wall = time.perf_counter() - t0
    target = sw.fit_target or ("err_eta" if twin.problem.has_eta else "err_p")
    report = SweepReport(rows, fit_sweep(rows, target), sw.eps_t_fraction * twin.problem.base.T, target, sw.noise)
    io.write_csv(out / "sweep.csv", SWEEP_HEADER, (r.as_tuple() for r in report.rows), prec)
    io.write_csv(out / "fit.csv", FIT_HEADER, [(report.fit.K, report.fit.theta, report.fit.residual, report.eps_t)],
                 prec)
    summary = CommandResult(command="sweep", workers=workers, wall_time=wall, fit_target=target,
                            noise_kind=sw.noise, K=report.fit.K, theta=report.fit.theta,
                            fit_residual=report.fit.residual, eps_t=report.eps_t,
                            median_err_p=report.medians("err_p"), median_err_eta=report.medians("err_eta"),
                            failed_rows=sum(not np.isfinite(r.misfit) for r in report.rows))
    summary["median_err_p"] = {format(k, ".17g"): v for k, v in summary["median_err_p"].items()}
    summary["median_err_eta"] = {format(k, ".17g"): v for k, v in summary["median_err_eta"].items()}
    io.write_json(out / "summary.json", summary)
    return summary


# ------------------------------------------------------------------------ convergence

def cmd_convergence(cfg: RunConfig, out: Path) -> CommandResult:
    cc = cfg.convergence
    prec = cfg.output.precision
    sol = ColeHopfSolution(cc.a, cc.A)
    t0 = time.perf_counter()
    ladders = [spatial_ladder(sol, cc.n_cells, cc.steps_per_cell, cc.T),
               temporal_ladder(sol, cc.time_steps, cc.time_cells, cc.T)]
    if cc.coupled and cfg.problem is not None:
        ladders.append(coupled_self_convergence(cfg.build_problem(), cc.coupled_cells, cc.coupled_steps_per_cell))
    wall = time.perf_counter() - t0
    rows = []
    for lad in ladders:
        orders = np.concatenate([[np.nan], lad.orders])
        rows += [(lad.name, int(r), e, o) for r, e, o in zip(lad.resolution, lad.error, orders)]
    io.write_csv(out / "convergence.csv", ("ladder", "resolution", "error", "order"), rows, prec)
    summary = CommandResult(command="convergence", wall_time=wall,
                            **{f"min_order_{lad.name}": lad.min_order for lad in ladders})
    io.write_json(out / "summary.json", summary)
    return summary


# ------------------------------------------------------------------------ oracle

def cmd_oracle(cfg: RunConfig, out: Path) -> CommandResult:
    oc = cfg.oracle
    prec = cfg.output.precision
    try:
        first, second = counterexample_pair(oc.ell, oc.n, oc.k, oc.A, coefficient=oc.coefficient,
                                            viscosity=oc.viscosity)
    except ValueError as exc:
        raise ConfigError(f"oracle: {exc}") from exc
    t = np.linspace(0.0, oc.T, int(oc.n_samples))
    u1, ux1 = first.lateral_traces(t)
    u2, ux2 = second.lateral_traces(t)
    e1, e2 = first.endpoint_trace(t), second.endpoint_trace(t)
    io.write_columns(out / "oracle.csv", {"t": t, "u1_x0": u1, "u1x_x0": ux1, "u2_x0": u2, "u2x_x0": ux2,
                                          "u1_end": e1, "u2_end": e2}, prec)
    gap = np.abs(e1 - e2)
    summary = CommandResult(command="oracle", ell=oc.ell, L=second.domain_length, n=oc.n, k=oc.k, A=oc.A,
                            coefficient=first.c,
                            cauchy_discrepancy=float(max(np.max(np.abs(u1 - u2)), np.max(np.abs(ux1 - ux2)))),
                            endpoint_sup_discrepancy=float(np.max(gap)),
                            endpoint_min_discrepancy=float(np.min(gap)),
                            endpoint_values_t0=[float(e1[0]), float(e2[0])])
    io.write_json(out / "summary.json", summary)
    return summary


COMMANDS = {
    "forward": cmd_forward,
    "inverse": cmd_inverse,
    "sweep": cmd_sweep,
    "convergence": cmd_convergence,
    "oracle": cmd_oracle,
}

PLOTSCRIPT = '''"""Plot every CSV in this directory: each column against the first."""
import csv
import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = pathlib.Path(__file__).resolve().parent
for path in sorted(here.glob("*.csv")):
    with path.open() as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = list(zip(*body)) if body else []

    def num(col):
        try:
            return [float({"true": 1, "false": 0}.get(v, v)) for v in col]
        except ValueError:
            return None

    if not cols:
        continue
    x = num(cols[0])
    fig, ax = plt.subplots()
    for name, col in zip(header[1:], cols[1:]):
        y = num(col)
        if x is not None and y is not None:
            ax.plot(x, y, label=name)
    ax.set_xlabel(header[0])
    ax.legend(fontsize="small")
    fig.savefig(path.with_suffix(".png"), dpi=120)
    plt.close(fig)
'''


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fsilab", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="YAML run configuration")
    ap.add_argument("--out", default=None, help="output directory (overrides output.directory)")
    ap.add_argument("--emit-plotscript", action="store_true", help="write plot.py next to the CSVs")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def run(command: str, cfg: RunConfig, out: Path, emit_plotscript: bool = False) -> CommandResult:
    result = COMMANDS[command](cfg, out)
    if emit_plotscript:
        (out / "plot.py").write_text(PLOTSCRIPT)
    return result


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        out = _out_dir(cfg, args.out)
        result = run(args.command, cfg, out, args.emit_plotscript)
    except DATA_ERRORS as exc:
        print(f"fsilab {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationAbort as exc:
        print(f"fsilab {args.command}: solver abort: {exc}", file=sys.stderr)
        return EXIT_ABORT
    if result.exit_code == EXIT_ABORT:
        print(f"fsilab {args.command}: solver abort: {result.get('abort_message', '')} (partial output written)",
              file=sys.stderr)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
