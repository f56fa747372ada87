"""YAML run configuration.

Every block maps onto a dataclass; unknown keys and missing required keys
raise :class:`ConfigError` naming the dotted key (``problem.T``).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .fsi_forward import FsiProblem
from .presets import PresetError, build_initial_velocity, build_signal

REQUIRED = object()


class ConfigError(ValueError):
    pass


@dataclass
class ProblemConfig:
    T: float = REQUIRED
    q0: float = REQUIRED
    q1: float = REQUIRED
    w0: Any = REQUIRED
    alpha: Any = REQUIRED
    eta: Any = REQUIRED
    delta: float = 0.1
    viscosity: float = 1.0


@dataclass
class DiscretizationConfig:
    n_cells_left: int = 64
    n_cells_right: int = 64
    n_steps: int = 256
    coupling_iters: int = 2
    coupling_tol: float = 1e-10
    compat_tol: float = 1e-8
    check_cfl: bool = True


@dataclass
class NoiseConfig:
    kind: str = "gaussian"
    amplitude: float = 0.0
    seed: int = 0


@dataclass
class InverseConfig:
    unknowns: str = "eta"
    p_true: Any = None
    eta_true: Any = None
    data_path: str | None = None
    init: str = "default"
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
    t_frac: float = 0.1
    noise: NoiseConfig = field(default_factory=NoiseConfig)


@dataclass
class SweepConfig:
    eps: list = field(default_factory=lambda: [1e-1, 1e-2, 1e-3, 1e-4])
    seeds: list = field(default_factory=lambda: [0, 1, 2])
    noise: str = "gaussian"
    eps_t_fraction: float = 0.1
    fit_target: str | None = None


@dataclass
class ConvergenceConfig:
    a: float = math.pi
    A: float = 2.0
    T: float = 0.2
    n_cells: list = field(default_factory=lambda: [32, 64, 128, 256])
    steps_per_cell: int = 4
    time_cells: int = 1024
    time_steps: list = field(default_factory=lambda: [8, 16, 32, 64])
    coupled: bool = True
    coupled_cells: list = field(default_factory=lambda: [16, 32, 64, 128])
    coupled_steps_per_cell: int = 4


@dataclass
class OracleConfig:
    ell: float = 1.0
    n: int = 1
    k: int = 2
    A: float = 2.0
    T: float = 1.0
    n_samples: int = 101
    coefficient: float | None = None
    viscosity: float = 1.0


@dataclass
class OutputConfig:
    directory: str = "out"
    precision: int = 17


@dataclass
class RunConfig:
    problem: ProblemConfig | None = None
    discretization: DiscretizationConfig = field(default_factory=DiscretizationConfig)
    inverse: InverseConfig = field(default_factory=InverseConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    convergence: ConvergenceConfig = field(default_factory=ConvergenceConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    source: str = field(default="", compare=False)

    def require_problem(self) -> ProblemConfig:
        if self.problem is None:
            raise ConfigError("missing required block 'problem'")
        return self.problem

    # ------------------------------------------------------------------ builders
    def signals(self):
        pc = self.require_problem()
        try:
            alpha = build_signal(pc.alpha)
            eta = build_signal(pc.eta)
            a0, e0 = float(alpha(0.0)), float(eta(0.0))
            w0 = build_initial_velocity(pc.w0, pc.q0, pc.q1, a0, e0)
        except PresetError as exc:
            raise ConfigError(f"problem: {exc}") from exc
        return w0, alpha, eta

    def build_problem(self) -> FsiProblem:
        pc = self.require_problem()
        d = self.discretization
        w0, alpha, eta = self.signals()
        return FsiProblem(w0, alpha, eta, float(pc.q0), float(pc.q1), T=float(pc.T), n_steps=int(d.n_steps),
                          n_cells_left=int(d.n_cells_left), n_cells_right=int(d.n_cells_right),
                          delta=float(pc.delta), viscosity=float(pc.viscosity),
                          coupling_iters=int(d.coupling_iters), coupling_tol=float(d.coupling_tol),
                          compat_tol=float(d.compat_tol), check_cfl=bool(d.check_cfl))

    def truth_signals(self):
        inv = self.inverse
        try:
            p_true = None if inv.p_true is None else build_signal(inv.p_true)
            eta_true = None if inv.eta_true is None else build_signal(inv.eta_true)
        except PresetError as exc:
            raise ConfigError(f"inverse: {exc}") from exc
        return p_true, eta_true

    def problem_kwargs(self) -> dict:
        inv = self.inverse
        return dict(p_knots=int(inv.p_knots), eta_knots=int(inv.eta_knots), lambda_p=float(inv.lambda_p),
                    lambda_eta=float(inv.lambda_eta), mu_jump=float(inv.mu_jump), max_iter=int(inv.max_iter),
                    gtol=float(inv.gtol), xtol=float(inv.xtol), fd_rel=float(inv.fd_rel),
                    fd_floor=float(inv.fd_floor))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("source")
        return d


BLOCKS = {
    "problem": ProblemConfig,
    "discretization": DiscretizationConfig,
    "inverse": InverseConfig,
    "sweep": SweepConfig,
    "convergence": ConvergenceConfig,
    "oracle": OracleConfig,
    "output": OutputConfig,
}
NESTED = {("inverse", "noise"): NoiseConfig}


def _coerce(value, default, key):
    if value is None or default is REQUIRED or default is None:
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected true/false, got {value!r}")
        return value
    if isinstance(default, int) and not isinstance(value, bool):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, str):
            try:
                return float(value)
            except ValueError:
                raise ConfigError(f"{key}: expected a number, got {value!r}") from None
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        return float(value)
    return value


def _build(cls, data, prefix):
    if not isinstance(data, dict):
        raise ConfigError(f"{prefix}: expected a mapping, got {type(data).__name__}")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise ConfigError(f"unknown key '{prefix}.{unknown[0]}'")
    kwargs = {}
    for name, f in names.items():
        key = f"{prefix}.{name}"
        nested = NESTED.get((prefix, name))
        if name not in data:
            if f.default is REQUIRED:
                raise ConfigError(f"missing required key '{key}'")
            continue
        value = data[name]
        if nested is not None:
            kwargs[name] = _build(nested, value, key)
            continue
        default = f.default if f.default is not dataclasses.MISSING else (
            f.default_factory() if f.default_factory is not dataclasses.MISSING else None)
        kwargs[name] = _coerce(value, default, key)
    return cls(**kwargs)


def _check(cfg: RunConfig) -> None:
    d = cfg.discretization
    for name in ("n_cells_left", "n_cells_right", "n_steps", "coupling_iters"):
        if getattr(d, name) < 1:
            raise ConfigError(f"discretization.{name} must be positive")
    if cfg.problem is not None and not cfg.problem.T > 0:
        raise ConfigError("problem.T must be positive")
    if cfg.inverse.unknowns not in ("p", "eta", "p+eta"):
        raise ConfigError(f"inverse.unknowns must be one of p, eta, p+eta; got {cfg.inverse.unknowns!r}")
    if cfg.inverse.init not in ("default", "truth"):
        raise ConfigError(f"inverse.init must be 'default' or 'truth'; got {cfg.inverse.init!r}")
    if not 1 <= cfg.output.precision <= 17:
        raise ConfigError("output.precision must lie in [1, 17]")
    if any(float(e) < 0 for e in cfg.sweep.eps):
        raise ConfigError("sweep.eps entries must be non-negative")


def config_from_dict(data: dict, source: str = "<dict>") -> RunConfig:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    unknown = sorted(set(data) - set(BLOCKS))
    if unknown:
        raise ConfigError(f"unknown block '{unknown[0]}'")
    kwargs = {name: _build(cls, data[name], name) for name, cls in BLOCKS.items() if name in data}
    cfg = RunConfig(**kwargs, source=source)
    _check(cfg)
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark is not None else ""
        raise ConfigError(f"{path}: YAML parse error{where}") from exc
    return config_from_dict(data, str(path))
