"""Output least-squares reconstruction of ``p`` and/or ``eta`` from ``(alpha, beta)``.

Unknown signals are clamped cubic splines whose leading coefficients are
pinned by the known initial data (``p(0) = q0``, ``p'(0) = q1``,
``eta(0) = w0(1)``).  Two forward maps are used:

* ``eta`` only: the coupled simulator is run with the candidate ``eta``;
  the particle path is an output.
* ``p`` (optionally with ``eta``): the candidate path is imposed
  kinematically and the Newton-law defect enters the objective as a
  penalty with weight ``mu_jump``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from ..fsi_forward import FsiProblem, FsiSolution, ProblemError, SimulationAbort, solve_forward, solve_prescribed
from ..geometry import GeometryError, InterfaceTrajectory
from .lm import LMResult, levenberg_marquardt
from .splines import SplineBasis

UNKNOWN_MODES = ("p", "eta", "p+eta")
SENTINEL = 1e30


@dataclass
class NoiseModel:
    kind: str = "gaussian"
    amplitude: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("gaussian", "uniform"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.amplitude < 0:
            raise ValueError("noise amplitude must be non-negative")

    def sample(self, n: int) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        if self.kind == "gaussian":
            xi = rng.standard_normal(n)
        else:
            xi = rng.uniform(-1.0, 1.0, n)
        return self.amplitude * xi

    def apply(self, beta: np.ndarray) -> np.ndarray:
        return np.asarray(beta, dtype=float) + self.sample(len(beta))


@dataclass
class ReconstructionProblem:
    base: FsiProblem
    observed_alpha: np.ndarray
    observed_beta: np.ndarray
    unknowns: str = "eta"
    p_knots: int = 8
    eta_knots: int = 8
    lambda_p: float = 0.0
    lambda_eta: float = 0.0
    mu_jump: float = 1.0
    max_iter: int = 200
    gtol: float = 1e-9
    xtol: float = 1e-10
    fd_rel: float = 1e-6
    fd_floor: float = 1e-8

    def __post_init__(self):
        if self.unknowns not in UNKNOWN_MODES:
            raise ValueError(f"unknowns must be one of {UNKNOWN_MODES}, got {self.unknowns!r}")
        if min(self.p_knots, self.eta_knots) < 4:
            raise ValueError("need at least 4 knots per unknown")
        if min(self.lambda_p, self.lambda_eta, self.mu_jump) < 0:
            raise ValueError("regularization weights must be non-negative")
        self.observed_alpha = np.asarray(self.observed_alpha, dtype=float)
        self.observed_beta = np.asarray(self.observed_beta, dtype=float)
        n = len(self.base.grid)
        if self.observed_alpha.shape != (n,) or self.observed_beta.shape != (n,):
            raise ValueError(f"observations must have {n} samples")
        if not (np.all(np.isfinite(self.observed_alpha)) and np.all(np.isfinite(self.observed_beta))):
            raise ValueError("observations must be finite")

    @property
    def has_p(self) -> bool:
        return self.unknowns in ("p", "p+eta")

    @property
    def has_eta(self) -> bool:
        return self.unknowns in ("eta", "p+eta")

    def forward_problem(self, eta=None) -> FsiProblem:
        return dataclasses.replace(self.base, alpha=self.observed_alpha,
                                   eta=self.base.eta if eta is None else eta)


class Parametrization:
    """Maps the free coefficient vector to trajectories and signals."""

    def __init__(self, problem: ReconstructionProblem):
        self.problem = problem
        base = problem.base
        t = base.grid.t
        self.p_basis = SplineBasis(base.T, problem.p_knots, t) if problem.has_p else None
        self.eta_basis = SplineBasis(base.T, problem.eta_knots, t) if problem.has_eta else None
        self.p_pins = {}
        self.eta_pins = {}
        if self.p_basis is not None:
            self.p_pins = {0: base.q0, 1: base.q0 + base.q1 * self.p_basis.spacing / 3.0}
        if self.eta_basis is not None:
            self.eta_pins = {0: float(base.w0(1.0))}
        self.p_free = [i for i in range(self.p_basis.size) if i not in self.p_pins] if self.p_basis else []
        self.eta_free = [i for i in range(self.eta_basis.size) if i not in self.eta_pins] if self.eta_basis else []

    @property
    def size(self) -> int:
        return len(self.p_free) + len(self.eta_free)

    def full_coefficients(self, x):
        x = np.asarray(x, dtype=float)
        pc = ec = None
        k = len(self.p_free)
        if self.p_basis is not None:
            pc = np.zeros(self.p_basis.size)
            for i, v in self.p_pins.items():
                pc[i] = v
            pc[self.p_free] = x[:k]
        if self.eta_basis is not None:
            ec = np.zeros(self.eta_basis.size)
            for i, v in self.eta_pins.items():
                ec[i] = v
            ec[self.eta_free] = x[k:]
        return pc, ec

    def free_vector(self, pc=None, ec=None) -> np.ndarray:
        parts = []
        if self.p_basis is not None:
            parts.append(np.asarray(pc, dtype=float)[self.p_free])
        if self.eta_basis is not None:
            parts.append(np.asarray(ec, dtype=float)[self.eta_free])
        return np.concatenate(parts) if parts else np.zeros(0)

    def from_signals(self, p=None, eta=None) -> np.ndarray:
        """Pinned least-squares projection of sampled truth signals."""
        pc = self.p_basis.project_pinned(p, self.p_pins) if self.p_basis is not None else None
        ec = self.eta_basis.project_pinned(eta, self.eta_pins) if self.eta_basis is not None else None
        return self.free_vector(pc, ec)

    def default_init(self) -> np.ndarray:
        """``p`` constant at ``q0`` (slope pinned), ``eta`` zero after its pinned start."""
        pc = ec = None
        if self.p_basis is not None:
            pc = np.full(self.p_basis.size, self.problem.base.q0)
        if self.eta_basis is not None:
            ec = np.zeros(self.eta_basis.size)
        return self.free_vector(pc, ec)

    def decode(self, x):
        pc, ec = self.full_coefficients(x)
        traj = eta = None
        if pc is not None:
            b = self.p_basis
            traj = InterfaceTrajectory(self.problem.base.grid, b.value(pc), b.d1(pc), b.d2(pc),
                                       delta=self.problem.base.delta)
        if ec is not None:
            eta = self.eta_basis.value(ec)
        return traj, eta

    def eta_derivative(self, x) -> np.ndarray | None:
        _, ec = self.full_coefficients(x)
        return None if ec is None else self.eta_basis.d1(ec)

    def bounds(self):
        bound = 1.0 - self.problem.base.delta
        lo = np.concatenate([np.full(len(self.p_free), -bound), np.full(len(self.eta_free), -np.inf)])
        hi = np.concatenate([np.full(len(self.p_free), bound), np.full(len(self.eta_free), np.inf)])
        return lo, hi


@dataclass
class Observation:
    beta: np.ndarray | None
    defect: np.ndarray | None = None
    solution: FsiSolution | None = None
    traj: InterfaceTrajectory | None = None
    eta: np.ndarray | None = None
    failed: bool = False
    reason: str = ""


def observation_operator(x, problem: ReconstructionProblem, param: Parametrization | None = None) -> Observation:
    """Predicted ``beta`` for a candidate; failures come back flagged, never raised."""
    param = param or Parametrization(problem)
    traj, eta = param.decode(x)
    if traj is not None and not traj.validate().within_margin:
        return Observation(None, failed=True, reason="candidate violates |p| <= 1 - delta", traj=traj, eta=eta)
    try:
        if problem.unknowns == "eta":
            sol = solve_forward(problem.forward_problem(eta), validate=False)
            return Observation(sol.traces.beta, None, sol, sol.traj, eta)
        fp = problem.forward_problem(eta if eta is not None else None)
        with_right = problem.mu_jump > 0
        sol = solve_prescribed(fp, traj, with_right=with_right)
        defect = sol.jump_defect() if with_right else None
        eta_used = eta if eta is not None else fp.eta_values()
        return Observation(sol.traces.beta, defect, sol, traj, eta_used)
    except (SimulationAbort, GeometryError, ProblemError) as exc:
        return Observation(None, failed=True, reason=str(exc), traj=traj, eta=eta)


def residual_vector(x, problem: ReconstructionProblem, param: Parametrization | None = None,
                    obs: Observation | None = None) -> np.ndarray | None:
    """Stacked residual whose half squared norm is the objective; None on failure."""
    param = param or Parametrization(problem)
    obs = obs or observation_operator(x, problem, param)
    if obs.failed:
        return None
    dt = problem.base.grid.dt
    parts = [np.sqrt(dt) * (obs.beta - problem.observed_beta)]
    if problem.has_p and problem.lambda_p > 0:
        parts.append(np.sqrt(problem.lambda_p * dt) * obs.traj.p_ddot)
    if problem.has_eta and problem.lambda_eta > 0:
        parts.append(np.sqrt(problem.lambda_eta * dt) * param.eta_derivative(x))
    if problem.has_p and problem.mu_jump > 0 and obs.defect is not None:
        parts.append(np.sqrt(2.0 * problem.mu_jump * dt) * obs.defect)
    r = np.concatenate(parts)
    if not np.all(np.isfinite(r)):
        return None
    return r


def objective(x, problem: ReconstructionProblem, param: Parametrization | None = None) -> float:
    r = residual_vector(x, problem, param)
    return SENTINEL if r is None else 0.5 * float(r @ r)


def misfit_norm(beta_pred, beta_obs, dt) -> float:
    return float(np.sqrt(dt * np.sum((np.asarray(beta_pred) - beta_obs) ** 2)))


@dataclass
class ReconstructionResult:
    x: np.ndarray
    p_hat: InterfaceTrajectory | None
    eta_hat: np.ndarray | None
    history: list[float]
    misfit: float
    iterations: int
    converged: bool
    unidentifiable: bool
    reason: str
    observation: Observation | None = field(default=None, repr=False)


def reconstruct(problem: ReconstructionProblem, init=None) -> ReconstructionResult:
    param = Parametrization(problem)
    x0 = param.default_init() if init is None else np.asarray(init, dtype=float)
    if x0.shape != (param.size,):
        raise ValueError(f"initial candidate must have {param.size} free coefficients")
    lo, hi = param.bounds()
    lm: LMResult = levenberg_marquardt(
        lambda x: residual_vector(x, problem, param), x0, lo, hi,
        max_iter=problem.max_iter, gtol=problem.gtol, xtol=problem.xtol,
        rel_step=problem.fd_rel, abs_floor=problem.fd_floor)
    obs = observation_operator(lm.x, problem, param)
    misfit = np.inf if obs.failed else misfit_norm(obs.beta, problem.observed_beta, problem.base.grid.dt)
    return ReconstructionResult(lm.x, obs.traj, obs.eta, lm.history, misfit, lm.iterations,
                                lm.converged, lm.unidentifiable, lm.reason, obs)


@dataclass
class Twin:
    problem: ReconstructionProblem
    x_true: np.ndarray
    truth: Observation


def make_twin(base: FsiProblem, unknowns: str = "eta", p_true=None, eta_true=None,
              noise: NoiseModel | None = None, **problem_kwargs) -> Twin:
    """Synthetic data generated through the same discretization used for inversion.

    ``p_true``/``eta_true`` are callables of ``t`` projected onto the spline
    spaces (with the initial-data pins); the data are the forward prediction
    of that projected truth, optionally perturbed by ``noise``.
    """
    t = base.grid.t
    alpha = base.alpha_values()
    stub = ReconstructionProblem(base, alpha, np.zeros_like(t), unknowns, **problem_kwargs)
    param = Parametrization(stub)
    x_true = param.from_signals(
        p=None if p_true is None else np.asarray(p_true(t), dtype=float),
        eta=None if eta_true is None else np.asarray(eta_true(t), dtype=float))
    truth = observation_operator(x_true, stub, param)
    if truth.failed:
        raise ProblemError(f"truth forward run failed: {truth.reason}")
    beta = truth.beta if noise is None else noise.apply(truth.beta)
    problem = dataclasses.replace(stub, observed_beta=beta)
    return Twin(problem, x_true, truth)


def window_mask(t: np.ndarray, t_min: float) -> np.ndarray:
    return t >= t_min - 1e-12


def sup_error(a, b, t, t_min: float, relative: bool = False) -> float:
    m = window_mask(t, t_min)
    err = float(np.max(np.abs(np.asarray(a)[m] - np.asarray(b)[m])))
    if relative:
        err /= float(np.max(np.abs(np.asarray(b)[m])))
    return err
