"""Residual-corrected multi-fidelity calibration.

Each round plans on the cheap model shifted by the last observed residual,
spends one expensive evaluation at the planned point, and refreshes the
residual from the gap between the two models there.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .costs import cost_stage3


class CalibrationFailed(RuntimeError):
    def __init__(self, result):
        last = result.residual_history[-1] if result.residual_history else None
        worst = float(np.max(np.abs(last.values))) if last is not None else float("nan")
        super().__init__(f"not converged after {result.hf_calls} expensive calls "
                         f"(max |residual| {worst:.3g} dB)")
        self.result = result


@dataclass
class Residual:
    """Piecewise-linear correction over a frequency grid."""

    grid: np.ndarray
    values: np.ndarray

    @classmethod
    def zero(cls, grid):
        grid = np.asarray(grid, dtype=float)
        return cls(grid, np.zeros_like(grid))

    def __call__(self, omega):
        return np.interp(np.asarray(omega, dtype=float), self.grid, self.values)


@dataclass
class CalibrationResult:
    params: object
    residual_history: list = field(default_factory=list)
    hf_calls: int = 0
    hf_curves: list = field(default_factory=list)
    converged: bool = False

    @property
    def final_curve(self):
        return self.hf_curves[-1] if self.hf_curves else None


def calibrate_multifidelity(lofi, hifi, planner, max_rounds: int = 5, grid=None,
                            gain_user: float | None = None, accept=None, mask=None,
                            residual0=None) -> CalibrationResult:
    """Alternate planning on ``lofi + residual`` with single ``hifi`` checks.

    ``planner(residual)`` returns parameters; ``lofi(x)``/``hifi(x)`` return
    curves on ``grid``.  The run stops when ``accept(curve)`` holds (default:
    zero band-plan cost on the ``mask`` points against ``gain_user``, or only
    the ripple term when no gain target is given).  ``residual0`` seeds the
    first plan with a residual measured earlier (a warm start).
    """
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    if accept is None:
        def accept(curve):
            band = np.asarray(curve)[mask] if mask is not None else np.asarray(curve)
            target = gain_user if gain_user is not None else float(np.min(band))
            return cost_stage3(band, target) == 0.0

    residual = residual0
    result = CalibrationResult(params=None)
    for _ in range(max_rounds):
        x = planner(residual)
        hf = np.asarray(hifi(x), dtype=float)
        lf = np.asarray(lofi(x), dtype=float)
        if hf.shape != lf.shape:
            raise ValueError("fidelities disagree on the grid size")
        g = np.asarray(grid, dtype=float) if grid is not None else np.arange(hf.size, dtype=float)
        residual = Residual(g, hf - lf)
        result.params = x
        result.hf_calls += 1
        result.hf_curves.append(hf)
        result.residual_history.append(residual)
        if accept(hf):
            result.converged = True
            return result
    raise CalibrationFailed(result)
