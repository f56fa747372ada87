"""Experiment batteries probing the logarithmic stability and uniqueness results.

All of them work with synthetic truths and report empirical stand-ins for
the existential constants: a fitted model ``err ~ K / |log(1/eps)|^theta``,
anchor ratios ``|p1 - p2|_inf / |p1(tbar) - p2(tbar)|``, and so on.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from ..burgers_core import SideField
from ..fsi_forward import FsiProblem, SimulationAbort, solve_forward, solve_prescribed
from ..geometry import InterfaceTrajectory, flip_reference
from .lm import levenberg_marquardt
from .reconstruction import NoiseModel, Twin, make_twin, reconstruct, sup_error
from .splines import SplineBasis


def _trapz_l2(values: np.ndarray, t: np.ndarray) -> np.ndarray:
    return np.sqrt(np.trapezoid(values**2, t, axis=0))


def interior_trace_norm(field, band: tuple[float, float], window: tuple[float, float] | None = None,
                        coordinate: str = "y", t: np.ndarray | None = None, coords: np.ndarray | None = None) -> float:
    """``sup_{x in band} (|u(x,.)|_{L2(window)} + |u_x(x,.)|_{L2(window)})`` on grid lines.

    ``field`` is a :class:`SideField` or a (levels, nodes) array together
    with ``t`` and ``coords``.  ``coordinate="xstar"`` measures in the
    reflected variable ``x* = 2 - 2y``.
    """
    if isinstance(field, SideField):
        values = field.history()
        t = field.grid.t[: values.shape[0]]
        coords = field.y
    else:
        values = np.asarray(field, dtype=float)
        if t is None or coords is None:
            raise ValueError("array input needs t and coords")
    if coordinate == "xstar":
        coords = flip_reference(coords)
        order = np.argsort(coords)
        coords, values = coords[order], values[:, order]
    elif coordinate != "y":
        raise ValueError(f"unknown coordinate {coordinate!r}")
    lo, hi = band
    in_band = (coords >= lo - 1e-12) & (coords <= hi + 1e-12)
    if not np.any(in_band):
        raise ValueError(f"band [{lo}, {hi}] contains no grid line")
    if window is None:
        window = (t[0], t[-1])
    tm = (t >= window[0] - 1e-12) & (t <= window[1] + 1e-12)
    if tm.sum() < 2:
        raise ValueError("window contains fewer than two time levels")
    u_x = np.gradient(values, coords, axis=1, edge_order=2)
    norms = _trapz_l2(values[tm][:, in_band], t[tm]) + _trapz_l2(u_x[tm][:, in_band], t[tm])
    return float(np.max(norms))


@dataclass
class LogFit:
    K: float
    theta: float
    residual: float

    def predict(self, eps):
        return self.K / np.abs(np.log(1.0 / np.asarray(eps, dtype=float))) ** self.theta


def fit_log_rate(eps, err) -> LogFit:
    """Least-squares fit of ``log err = log K - theta log |log(1/eps)|``."""
    eps = np.asarray(eps, dtype=float)
    err = np.asarray(err, dtype=float)
    ok = (eps > 0) & (eps < 1) & np.isfinite(err) & (err > 0)
    if ok.sum() < 2:
        return LogFit(np.nan, np.nan, np.nan)
    X = np.log(np.abs(np.log(1.0 / eps[ok])))
    Y = np.log(err[ok])
    slope, intercept = np.polyfit(X, Y, 1)
    resid = Y - (intercept + slope * X)
    return LogFit(float(np.exp(intercept)), float(-slope), float(np.sqrt(np.mean(resid**2))))


# ---------------------------------------------------------------- trace estimate

@dataclass
class TraceEstimateReport:
    k: np.ndarray
    discrepancy: np.ndarray
    fit: LogFit
    t_min: float
    iterations: list[int] = field(default_factory=list)


def _unit_direction(n: int, rng: np.random.Generator, t: np.ndarray) -> np.ndarray:
    xi = rng.standard_normal(n)
    xi[0] = 0.0
    return xi / np.sqrt(np.trapezoid(xi**2, t))


def trace_estimate_experiment(base: FsiProblem, traj: InterfaceTrajectory, k_list, knots: int = 8,
                              lam: float = 0.0, t_frac: float = 0.1, seed: int = 0,
                              max_iter: int = 100) -> TraceEstimateReport:
    """Interface-trace discrepancy of the left lateral problem versus data discrepancy ``k``.

    The path ``traj`` is prescribed; the unknown is the interface Dirichlet
    trace ``g(t) = u(p(t), t)``, a pinned cubic spline.  For each ``k`` the
    Cauchy pair is perturbed by ``|d alpha|_{L2} = |d beta|_{L2} = k/2`` in a
    fixed random direction, ``g`` is re-fitted to the perturbed data, and the
    sup discrepancy on ``[t_frac T, T]`` is recorded.
    """
    k_arr = np.asarray(list(k_list), dtype=float)
    if np.any(k_arr >= 1) or np.any(k_arr < 0):
        raise ValueError("data discrepancy levels must lie in [0, 1)")
    grid = base.grid
    t = grid.t
    dt = grid.dt
    basis = SplineBasis(base.T, knots, t)
    pins = {0: float(traj.p_dot[0])}
    free = [i for i in range(basis.size) if i not in pins]
    g_coef = basis.project_pinned(traj.p_dot, pins)
    g_true = basis.value(g_coef)
    ref = solve_prescribed(base, traj, interface_trace=g_true, with_right=False)
    alpha1, beta1 = ref.traces.alpha, ref.traces.beta
    rng = np.random.default_rng(seed)
    da, db = _unit_direction(len(t), rng, t), _unit_direction(len(t), rng, t)

    def coefficients(x):
        c = g_coef.copy()
        c[free] = x
        return c

    discrepancy, iters = [], []
    for k in k_arr:
        alpha2 = alpha1 + 0.5 * k * da
        beta2 = beta1 + 0.5 * k * db
        prob = dataclasses.replace(base, alpha=alpha2)

        def residual(x):
            c = coefficients(x)
            try:
                sol = solve_prescribed(prob, traj, interface_trace=basis.value(c), with_right=False)
            except (SimulationAbort, ValueError):
                return None
            r = [np.sqrt(dt) * (sol.traces.beta - beta2)]
            if lam > 0:
                r.append(np.sqrt(lam * dt) * basis.d1(c))
            r = np.concatenate(r)
            return r if np.all(np.isfinite(r)) else None

        res = levenberg_marquardt(residual, g_coef[free], max_iter=max_iter)
        g_hat = basis.value(coefficients(res.x))
        discrepancy.append(sup_error(g_hat, g_true, t, t_frac * base.T))
        iters.append(res.iterations)
    d = np.asarray(discrepancy)
    return TraceEstimateReport(k_arr, d, fit_log_rate(k_arr, d), t_frac * base.T, iters)


# ---------------------------------------------------------------- anchor ratios

@dataclass
class AnchorReport:
    anchors: np.ndarray
    ratios: np.ndarray       # nan where skipped
    sup_difference: float
    beta_discrepancy: float  # |beta1 - beta2|_{L2(0,T)}, reported not assumed

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.ratios)

    @property
    def R0(self) -> float:
        r = self.ratios[self.valid]
        return float(np.max(r)) if r.size else np.nan

    @property
    def spread(self) -> float:
        r = self.ratios[self.valid]
        return float(np.max(r) / np.min(r)) if r.size else np.nan


def anchor_ratios(p1: np.ndarray, p2: np.ndarray, t: np.ndarray, anchors, floor: float = 1e-13):
    diff = np.abs(np.asarray(p1) - np.asarray(p2))
    sup = float(np.max(diff))
    out = []
    for tb in anchors:
        j = int(np.argmin(np.abs(t - tb)))
        out.append(np.nan if diff[j] < floor else sup / diff[j])
    return np.asarray(out), sup


def anchor_experiment(problem: FsiProblem, dq0: float = 1e-3, anchors=None,
                      second: FsiProblem | None = None, compat_tol: float = 1e-2) -> AnchorReport:
    """Ratio table for a pair of runs differing only in the initial particle data.

    By default the second run shifts ``q0`` by ``dq0`` (the compatibility
    tolerance is relaxed to ``compat_tol`` because ``w0(q0)`` moves with it).
    """
    t = problem.grid.t
    if anchors is None:
        anchors = problem.T * np.linspace(0.1, 0.9, 9)
    if second is None:
        second = dataclasses.replace(problem, q0=problem.q0 + dq0,
                                     compat_tol=max(problem.compat_tol, compat_tol))
    s1 = solve_forward(problem)
    s2 = solve_forward(second)
    ratios, sup = anchor_ratios(s1.traj.p, s2.traj.p, t, anchors)
    db = float(np.sqrt(np.trapezoid((s1.traces.beta - s2.traces.beta) ** 2, t)))
    return AnchorReport(np.asarray(anchors, dtype=float), ratios, sup, db)


# ---------------------------------------------------------------- stability sweep

SWEEP_HEADER = ("eps", "seed", "err_p", "err_eta", "misfit", "iters", "converged")
FIT_HEADER = ("K", "theta", "fit_residual", "eps_t")


@dataclass
class SweepRow:
    eps: float
    seed: int
    err_p: float
    err_eta: float
    misfit: float
    iters: int
    converged: bool

    def as_tuple(self):
        return (self.eps, self.seed, self.err_p, self.err_eta, self.misfit, self.iters, self.converged)


@dataclass
class SweepReport:
    rows: list[SweepRow]
    fit: LogFit
    eps_t: float
    fit_target: str = "err_eta"
    noise_kind: str = "gaussian"

    def __post_init__(self):
        self.rows = sorted(self.rows, key=lambda r: (r.eps, r.seed))

    def medians(self, column: str) -> dict[float, float]:
        out = {}
        for eps in sorted({r.eps for r in self.rows}):
            vals = [getattr(r, column) for r in self.rows if r.eps == eps]
            out[eps] = float(np.median(vals))
        return out


def sweep_row(twin: Twin, eps: float, seed: int, kind: str = "gaussian", t_frac: float = 0.1,
              init=None) -> SweepRow:
    """Reconstruct from noisy data for one ``(eps, seed)`` pair; failures become a row."""
    prob = twin.problem
    t = prob.base.grid.t
    noisy = dataclasses.replace(prob, observed_beta=NoiseModel(kind, eps, seed).apply(twin.truth.beta))
    t_min = t_frac * prob.base.T
    try:
        res = reconstruct(noisy, init=init)
    except (SimulationAbort, ValueError):
        return SweepRow(eps, seed, np.nan, np.nan, np.nan, 0, False)
    err_p = err_eta = np.nan
    if res.p_hat is not None and twin.truth.traj is not None:
        err_p = sup_error(res.p_hat.p, twin.truth.traj.p, t, t_min)
    if res.eta_hat is not None and twin.truth.eta is not None:
        err_eta = sup_error(res.eta_hat, twin.truth.eta, t, t_min)
    return SweepRow(float(eps), int(seed), err_p, err_eta, res.misfit, res.iterations, bool(res.converged))


def fit_sweep(rows, column: str = "err_eta") -> LogFit:
    eps_vals = sorted({r.eps for r in rows if r.eps > 0})
    med = [np.median([getattr(r, column) for r in rows if r.eps == e]) for e in eps_vals]
    return fit_log_rate(eps_vals, med)


def stability_sweep(base: FsiProblem, eps_list, seeds, eta_true=None, p_true=None, unknowns: str = "eta",
                    kind: str = "gaussian", t_frac: float = 0.1, twin: Twin | None = None,
                    fit_target: str | None = None, **problem_kwargs) -> SweepReport:
    """Noise sweep over ``eps_list x seeds`` against one synthetic truth.

    The fit uses the per-``eps`` medians of ``fit_target`` (default the
    error of the primary unknown).
    """
    if twin is None:
        twin = make_twin(base, unknowns, p_true=p_true, eta_true=eta_true, **problem_kwargs)
    rows = [sweep_row(twin, eps, seed, kind, t_frac) for eps in eps_list for seed in seeds]
    if fit_target is None:
        fit_target = "err_eta" if twin.problem.has_eta else "err_p"
    return SweepReport(rows, fit_sweep(rows, fit_target), t_frac * base.T, fit_target, kind)
