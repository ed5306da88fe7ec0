"""Pseudo-spectral Q-tensor/Navier-Stokes solver with a Littlewood-Paley
toolkit and an invariant-verification harness on the 2D periodic torus."""

from .spectral import Grid
from .qtensor import ModelParams, State
from .dyadic import DyadicPartition, NormSpec

__all__ = ["Grid", "ModelParams", "State", "DyadicPartition", "NormSpec"]
__version__ = "0.1.0"
