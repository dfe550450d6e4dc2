"""Benchmark forward/adjoint problems."""

from .base import FunctionModel, ModelError, ModelProblem
from .diffusion import DiffusionModel
from .kle import KLEField, kle_build
from .lotka_volterra import LotkaVolterraModel

__all__ = [
    "DiffusionModel",
    "FunctionModel",
    "KLEField",
    "LotkaVolterraModel",
    "ModelError",
    "ModelProblem",
    "kle_build",
]
