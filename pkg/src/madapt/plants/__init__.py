"""Simulated plants and their nominal models."""

from . import pbr, quadratic, williams_otto
from .base import BoxScaling, NominalModel, PlantOracle, zero_model

PLANT_NAMES = ("quadratic", "williams-otto", "pbr")

__all__ = [
    "BoxScaling",
    "NominalModel",
    "PlantOracle",
    "PLANT_NAMES",
    "pbr",
    "quadratic",
    "williams_otto",
    "zero_model",
]
