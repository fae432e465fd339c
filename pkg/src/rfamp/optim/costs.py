"""Penalty costs for the critical-stage match and the band plan.

Both are piecewise linear with a weight of 1000 per dB of violation and are
zero exactly on their feasible sets.
"""

import numpy as np

WEIGHT = 1000.0
S11_TARGET_DB = -20.0
RIPPLE_DB = 3.0
GAIN_TOL_DB = 3.0
DEFAULT_HEADROOM = 0.2


def cost_stage2(nf_sim: float, s11_sim: float, nf_user: float, headroom: float = DEFAULT_HEADROOM) -> float:
    """Noise above ``nf_user - headroom`` plus input match above -20 dB."""
    return (WEIGHT * max(0.0, nf_sim - (nf_user - headroom))
            + WEIGHT * max(0.0, s11_sim - S11_TARGET_DB))


def cost_stage3(gain_cal, gain_user: float) -> float:
    """Gain floor deviation beyond 3 dB plus ripple beyond 3 dB."""
    g = np.asarray(gain_cal, dtype=float)
    if g.size == 0:
        raise ValueError("empty gain curve")
    gmin, gmax = float(g.min()), float(g.max())
    return (WEIGHT * max(0.0, abs(gain_user - gmin) - GAIN_TOL_DB)
            + WEIGHT * max(0.0, gmax - gmin - RIPPLE_DB))


def shortfall(required: float, attained: float) -> float:
    """Penalty for ``attained`` falling below ``required`` (zero for -inf)."""
    if required == -np.inf:
        return 0.0
    if required == np.inf:
        return np.inf
    return WEIGHT * max(0.0, required - attained)
