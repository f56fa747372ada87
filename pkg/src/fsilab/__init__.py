"""Forward and inverse simulation of a 1D viscous Burgers fluid coupled to a point particle."""

from .cole_hopf import ColeHopfSolution, counterexample_pair
from .fsi_forward import (CauchyTraces, FsiProblem, FsiSolution, ProblemError, SimulationAbort, solve_forward,
                          solve_prescribed)
from .geometry import InterfaceTrajectory, TimeGrid

__all__ = [
    "CauchyTraces",
    "ColeHopfSolution",
    "FsiProblem",
    "FsiSolution",
    "InterfaceTrajectory",
    "ProblemError",
    "SimulationAbort",
    "TimeGrid",
    "counterexample_pair",
    "solve_forward",
    "solve_prescribed",
]

__version__ = "0.1.0"
