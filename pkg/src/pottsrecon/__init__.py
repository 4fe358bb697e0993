"""Piecewise-constant image reconstruction with the multivariate Potts model."""

from .algo1 import Algo1Config, run_algo1
from .algo2 import Algo2Config, run_algo2
from .core import DirectionModel, build_direction_model, potts_energy, relaxed_energy
from .coupling import CouplingScheme
from .potts1d import Segmentation1D, solve_univariate
from .projection import Partition, project

__version__ = "0.1.0"

__all__ = [
    "Algo1Config",
    "Algo2Config",
    "CouplingScheme",
    "DirectionModel",
    "Partition",
    "Segmentation1D",
    "build_direction_model",
    "potts_energy",
    "project",
    "relaxed_energy",
    "run_algo1",
    "run_algo2",
    "solve_univariate",
]
