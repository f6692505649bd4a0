"""Material-point engine and weight discovery for growth and remodeling
driven by a homeostatic surface."""

from .discovery import Dataset, Experiment, LossReport, RegMask, TrainConfig, train
from .energy_net import EnergyWeights, moduli
from .material_point import (
    Constraint,
    GrowthState,
    LoadingProtocol,
    StepResult,
    Trajectory,
    simulate,
    step,
)
from .potential_net import ActivationMode, PotentialWeights

__version__ = "0.1.0"

__all__ = [
    "ActivationMode",
    "Constraint",
    "Dataset",
    "EnergyWeights",
    "Experiment",
    "GrowthState",
    "LoadingProtocol",
    "LossReport",
    "PotentialWeights",
    "RegMask",
    "StepResult",
    "TrainConfig",
    "Trajectory",
    "moduli",
    "simulate",
    "step",
    "train",
]
