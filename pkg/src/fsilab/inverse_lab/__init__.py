"""Output-least-squares reconstruction of the particle path and far boundary trace."""

from .experiments import (anchor_experiment, fit_log_rate, interior_trace_norm, stability_sweep,
                          trace_estimate_experiment)
from .lm import LMResult, levenberg_marquardt
from .reconstruction import (NoiseModel, ReconstructionProblem, ReconstructionResult, make_twin, objective,
                             observation_operator, reconstruct)
from .splines import SplineBasis

__all__ = [
    "LMResult",
    "NoiseModel",
    "ReconstructionProblem",
    "ReconstructionResult",
    "SplineBasis",
    "anchor_experiment",
    "fit_log_rate",
    "interior_trace_norm",
    "levenberg_marquardt",
    "make_twin",
    "objective",
    "observation_operator",
    "reconstruct",
    "stability_sweep",
    "trace_estimate_experiment",
]
