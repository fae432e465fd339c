"""Optimizers, stage costs and multi-fidelity calibration."""

from .base import Bounds, CountedCost, OptResult
from .bo import bo_minimize
from .costs import cost_stage2, cost_stage3
from .ga import ga_minimize
from .multifidelity import CalibrationFailed, CalibrationResult, Residual, calibrate_multifidelity
from .pso import pso_minimize
from .sa import sa_minimize

__all__ = [
    "Bounds", "CountedCost", "OptResult", "bo_minimize", "cost_stage2", "cost_stage3",
    "ga_minimize", "CalibrationFailed", "CalibrationResult", "Residual",
    "calibrate_multifidelity", "pso_minimize", "sa_minimize",
]
