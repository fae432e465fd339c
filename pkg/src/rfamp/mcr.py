"""Magnetically coupled resonator (MCR) analytics.

Two coupled parallel-RLC tanks sharing a resonance w0 and quality factor Q.
The input admittance and transimpedance below come from nodal analysis of
that circuit; with P(s) the common quartic,

    Y11 = P(s) / (R_S * w0 * s * N(s))
    Z21 = k Q w0^3 sqrt(R_S R_2) s / P(s)

where N(s) = (1-k^2) Q s^2 + (1-k^2) w0 s + w0^2 Q.  A stage driven by a
transistor characterized into 50 ohm produces V = I11 * Z21 / 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels

C_MAX_FF = 200.0
RESONANCE_TOL = 1e-3
MAX_BISECT = 60


class DegenerateNetwork(ValueError):
    pass


class Unrealizable(ValueError):
    pass


class GridMismatch(ValueError):
    pass


@dataclass(frozen=True)
class MCRParams:
    k: float
    omega0: float  # rad/s
    q0: float
    c: float  # fF

    def as_vector(self):
        return [self.k, self.omega0, self.q0, self.c]

    @property
    def r_tank(self) -> float:
        """Parallel tank resistance Q0 / (w0 C) in ohm."""
        return self.q0 / (self.omega0 * self.c * 1e-15)


@dataclass(frozen=True)
class MCRPhysical:
    k: float
    l1: float  # pH
    l2: float
    r1: float  # ohm
    r2: float
    c1: float  # fF
    c2: float

    def as_vector(self):
        return [self.k, self.l1, self.l2, self.r1, self.r2, self.c1, self.c2]

    @classmethod
    def from_vector(cls, v):
        return cls(*(float(x) for x in v))


@dataclass(frozen=True)
class SourceModel:
    gm: float  # mS
    rs: float  # ohm
    cs: float  # fF

    def __post_init__(self):
        if self.gm < 0 or not self.rs > 0 or self.cs < 0:
            raise ValueError("SourceModel needs gm >= 0, rs > 0, cs >= 0")


def _quartic(k, w0, q, s):
    k2 = 1.0 - k * k
    return (k2 * q * q * s**4 + 2 * k2 * q * w0 * s**3 + (k2 + 2 * q * q) * w0**2 * s**2
            + 2 * q * w0**3 * s + q * q * w0**4)


def _check_jw(s, y):
    s = np.asarray(s)
    on_axis = np.isclose(s.real, 0.0) & (s.imag > 0)
    if np.any(np.real(y)[on_axis] <= 0):
        raise DegenerateNetwork("Re(Y11) <= 0 on the jw axis")


def y11(params: MCRParams, rs: float, s):
    """Input admittance (S) of the symmetric MCR with tank resistance ``rs``."""
    k, w0, q = params.k, params.omega0, params.q0
    k2 = 1.0 - k * k
    s = np.asarray(s, dtype=complex)
    n = k2 * q * s * s + k2 * w0 * s + w0 * w0 * q
    y = _quartic(k, w0, q, s) / (rs * w0 * s * n)
    _check_jw(s, y)
    return y


def y11_printed(params: MCRParams, rs: float, s):
    """Y11 with the constant denominator term exactly as typeset (no factor s).

    Kept for comparison only: that term is dimensionally inconsistent with
    the rest of the denominator.
    """
    k, w0, q = params.k, params.omega0, params.q0
    k2 = 1.0 - k * k
    s = np.asarray(s, dtype=complex)
    den = k2 * rs * w0 * q * s**3 + k2 * rs * w0**2 * s**2 + rs * w0**3 * q
    return _quartic(k, w0, q, s) / den


def load_equivalent(params: MCRParams, rs: float, omega):
    """(R_L, C_L) parallel equivalent of 1/Y11 at ``omega``; C_L in farads."""
    y = y11(params, rs, 1j * np.asarray(omega, dtype=float))
    return 1.0 / y.real, y.imag / np.asarray(omega, dtype=float)


def z21(params: MCRParams, rs: float, r2: float, s):
    k, w0, q = params.k, params.omega0, params.q0
    s = np.asarray(s, dtype=complex)
    y11(params, rs, s)  # raises on a degenerate network
    return k * q * w0**3 * math.sqrt(rs * r2) * s / _quartic(k, w0, q, s)


def stage_voltage(source: SourceModel, params: MCRParams, r2: float, s):
    """Complex voltage gain of one gain stage loaded by an MCR."""
    s = np.asarray(s, dtype=complex)
    y = y11(params, source.rs, s)
    rl = 1.0 / y.real
    cl = y.imag / s.imag
    gm = source.gm * 1e-3
    rs = source.rs
    cs = source.cs * 1e-15
    i11 = (gm * (50 * rs * cs * s + rs + 50) / rs
           * rs * (rl * cl * s + 1) / (rs * rl * (cs + cl) * s + rs + rl))
    return i11 * z21(params, source.rs, r2, s) / 2.0


def stage_voltage_fast(source: SourceModel, params: MCRParams, r2: float, omegas):
    """Same as ``stage_voltage`` on the jw axis, through the compiled kernel."""
    return kernels.mcr_stage_voltage(
        params.k, params.omega0, params.q0, source.rs, source.cs * 1e-15, r2,
        source.gm * 1e-3, np.asarray(omegas, dtype=float),
    )


def chain_gain(stages: Sequence, head, omegas, fast: bool = True) -> np.ndarray:
    """Head gain plus the dB voltage gain of each (source, params[, r2]) stage.

    Without an explicit r2 the stage is treated as symmetric (r2 = source.rs).
    """
    head = np.asarray(head, dtype=float)
    omegas = np.asarray(omegas, dtype=float)
    if head.shape != omegas.shape:
        raise GridMismatch(f"head has {head.size} points, grid has {omegas.size}")
    total = head.copy()
    for stage in stages:
        source, params = stage[0], stage[1]
        r2 = stage[2] if len(stage) > 2 else source.rs
        if fast:
            v = stage_voltage_fast(source, params, r2, omegas)
        else:
            v = stage_voltage(source, params, r2, 1j * omegas)
        total += 20.0 * np.log10(np.abs(v))
    return total


def resonance(l_ph: float, c_ff: float) -> float:
    # scale after the root so tiny capacitances do not underflow to zero
    lc = l_ph * c_ff
    return math.inf if lc <= 0 else 1.0 / (math.sqrt(lc) * math.sqrt(1e-27))


def to_physical(params: MCRParams, load_absorb=0.0, info: dict | None = None) -> MCRPhysical:
    """Physical realization whose loaded tanks are identical and resonate at w0.

    ``load_absorb`` is the loading capacitance (fF) the tanks must absorb:
    a scalar for both sides, or a (primary, secondary) pair.  The tank
    inductance is fixed by the abstract (w0, C); a bisection over the
    effective capacitance in [max absorb, 200] fF finds the point where the
    loaded tank resonates at w0, and l, r follow from that capacitance.
    """
    a1, a2 = (load_absorb, load_absorb) if np.isscalar(load_absorb) else tuple(load_absorb)
    a1, a2 = float(a1), float(a2)
    lo = max(a1, a2)
    if min(a1, a2) < 0 or lo >= C_MAX_FF:
        raise Unrealizable(f"absorbed loading {load_absorb} fF outside [0, {C_MAX_FF})")
    w0 = params.omega0
    l_target = 1e12 / (w0 * w0 * params.c * 1e-15)  # pH

    def detune(c_eff):
        if c_eff <= 0:
            return math.inf
        return resonance(l_target, c_eff) / w0 - 1.0  # decreasing in c_eff

    hi = C_MAX_FF
    if detune(lo) < -RESONANCE_TOL or detune(hi) > RESONANCE_TOL:
        raise Unrealizable(f"no tank capacitance in [{lo}, {hi}] fF resonates at w0")
    iterations = 0
    c_eff = lo
    for iterations in range(1, MAX_BISECT + 1):
        c_eff = 0.5 * (lo + hi)
        err = detune(c_eff)
        if abs(err) <= RESONANCE_TOL * 0.5:
            break
        if err > 0:
            lo = c_eff
        else:
            hi = c_eff
    if info is not None:
        info["iterations"] = iterations
        info["c_eff"] = c_eff
    l = 1e12 / (w0 * w0 * c_eff * 1e-15)
    r = params.q0 / (w0 * c_eff * 1e-15)
    return MCRPhysical(params.k, l, l, r, r, c_eff - a1, c_eff - a2)


def from_physical(phys: MCRPhysical, load_absorb: float = 0.0) -> tuple[float, float]:
    """Re-derive (w0, Q0) of the primary tank including absorbed loading."""
    c_eff = phys.c1 + load_absorb
    w0 = resonance(phys.l1, c_eff)
    return w0, w0 * phys.r1 * c_eff * 1e-15
