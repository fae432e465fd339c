"""Reference (high-fidelity) evaluator for the three-stage LNA chain.

The chain is a cascade of two-ports evaluated through transmission (ABCD)
matrices with a 50 ohm source and the output load as the final shunt block:

    L-match -> cascode(+Ls) -> MCR1 -> diff-CS -> MCR2 -> diff-CS -> MCR3 -> load

Gain is the voltage gain from the available source EMF (2 V_load / V_s),
which equals S21 whenever the load is 50 ohm.  Noise uses a Friis cascade and
compression an input-referred 1 dB cascade, both at a single frequency.
"""

from __future__ import annotations

import hashlib
import json
import math
import threading
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .device_kb import DeviceKind, DeviceRecord, VDD, default_tables, find_record
from .mcr import MCRPhysical
from .spec import DesignSpec, LoadModel

Z0 = 50.0
C_MISMATCH = 4.0
S_FLOOR_DB = -100.0
S11_BAND_MAX_DB = -10.0
RIPPLE_DB = 3.0
GAIN_TOL_DB = 3.0


class UnknownDevice(KeyError):
    pass


class SingularNetwork(ArithmeticError):
    def __init__(self, message, freq_ghz=None):
        super().__init__(message if freq_ghz is None else f"{message} at {freq_ghz:.6g} GHz")
        self.freq_ghz = freq_ghz


class AssemblyError(ValueError):
    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class EvalCounter:
    """Thread-safe tally of high-fidelity evaluations."""

    def __init__(self):
        self._lock = threading.Lock()
        self._value = 0

    @property
    def value(self) -> int:
        with self._lock:
            return self._value

    def increment(self, n: int = 1) -> int:
        with self._lock:
            self._value += n
            return self._value


HF_COUNTER = EvalCounter()


def _omega(freqs_ghz):
    return 2 * np.pi * np.asarray(freqs_ghz, dtype=float) * 1e9


def _abcd_from_y(y11, y12, y21, y22):
    det = y11 * y22 - y12 * y21
    out = np.empty(np.shape(y11) + (2, 2), dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):  # y21 = 0 surfaces as SingularNetwork
        out[..., 0, 0] = -y22 / y21
        out[..., 0, 1] = -1.0 / y21
        out[..., 1, 0] = -det / y21
        out[..., 1, 1] = -y11 / y21
    return out


# -- blocks -----------------------------------------------------------------
#
# Every block exposes abcd(omega) and elements(a, b, tag), the latter listing
# lumped elements between its port nodes for flattening into a netlist.
# Element tuples: ("R"|"C"|"L", name, n1, n2, value_SI), ("K", name, l1, l2, k),
# ("G", name, out+, out-, ctrl+, ctrl-, gm).  Node "0" is ground.


@dataclass(frozen=True)
class SeriesZ:
    r: float = 0.0  # ohm
    l: float = 0.0  # pH

    def abcd(self, omega):
        z = self.r + 1j * omega * self.l * 1e-12
        out = np.zeros(omega.shape + (2, 2), dtype=complex)
        out[..., 0, 0] = 1.0
        out[..., 0, 1] = z
        out[..., 1, 1] = 1.0
        return out

    def elements(self, a, b, tag):
        mid = f"{tag}.m"
        return [("R", f"{tag}.r", a, mid, self.r), ("L", f"{tag}.l", mid, b, self.l * 1e-12)]


@dataclass(frozen=True)
class ShuntRC:
    r: float = math.inf  # ohm
    c: float = 0.0  # fF

    def admittance(self, omega):
        g = 0.0 if math.isinf(self.r) else 1.0 / self.r
        return g + 1j * omega * self.c * 1e-15

    def abcd(self, omega):
        out = np.zeros(omega.shape + (2, 2), dtype=complex)
        out[..., 0, 0] = 1.0
        out[..., 1, 0] = self.admittance(omega)
        out[..., 1, 1] = 1.0
        return out

    def elements(self, a, b, tag):
        els = [("L", f"{tag}.thru", a, b, 0.0)]
        if not math.isinf(self.r):
            els.append(("R", f"{tag}.r", a, "0", self.r))
        if self.c > 0:
            els.append(("C", f"{tag}.c", a, "0", self.c * 1e-15))
        return els


@dataclass(frozen=True)
class LMatch:
    """Shunt inductor at the source side followed by a series inductor."""

    l_par: float  # pH, 0 means absent
    l_g: float  # pH

    def abcd(self, omega):
        out = np.zeros(omega.shape + (2, 2), dtype=complex)
        y = 0.0 if self.l_par <= 0 else 1.0 / (1j * omega * self.l_par * 1e-12)
        z = 1j * omega * self.l_g * 1e-12
        out[..., 0, 0] = 1.0
        out[..., 0, 1] = z
        out[..., 1, 0] = y
        out[..., 1, 1] = 1.0 + y * z
        return out

    def elements(self, a, b, tag):
        els = [("L", f"{tag}.lg", a, b, self.l_g * 1e-12)]
        if self.l_par > 0:
            els.append(("L", f"{tag}.lpar", a, "0", self.l_par * 1e-12))
        return els


@dataclass(frozen=True)
class MCRBlock:
    phys: MCRPhysical
    extra_r1: float = math.inf  # ohm, loading folded into the primary
    extra_r2: float = math.inf

    def y_params(self, omega):
        p = self.phys
        l1, l2 = p.l1 * 1e-12, p.l2 * 1e-12
        m = p.k * math.sqrt(l1 * l2)
        det = l1 * l2 - m * m
        s = 1j * omega
        g1 = 1.0 / p.r1 + (0.0 if math.isinf(self.extra_r1) else 1.0 / self.extra_r1)
        g2 = 1.0 / p.r2 + (0.0 if math.isinf(self.extra_r2) else 1.0 / self.extra_r2)
        y11 = g1 + s * p.c1 * 1e-15 + l2 / (s * det)
        y22 = g2 + s * p.c2 * 1e-15 + l1 / (s * det)
        y12 = -m / (s * det)
        return y11, y12, y12, y22

    def abcd(self, omega):
        return _abcd_from_y(*self.y_params(omega))

    def elements(self, a, b, tag):
        p = self.phys
        els = [
            ("R", f"{tag}.r1", a, "0", p.r1),
            ("R", f"{tag}.r2", b, "0", p.r2),
            ("L", f"{tag}.l1", a, "0", p.l1 * 1e-12),
            ("L", f"{tag}.l2", b, "0", p.l2 * 1e-12),
            ("K", f"{tag}.k", f"{tag}.l1", f"{tag}.l2", p.k),
        ]
        if p.c1 > 0:
            els.append(("C", f"{tag}.c1", a, "0", p.c1 * 1e-15))
        if p.c2 > 0:
            els.append(("C", f"{tag}.c2", b, "0", p.c2 * 1e-15))
        if not math.isinf(self.extra_r1):
            els.append(("R", f"{tag}.x1", a, "0", self.extra_r1))
        if not math.isinf(self.extra_r2):
            els.append(("R", f"{tag}.x2", b, "0", self.extra_r2))
        return els


@dataclass(frozen=True)
class ActiveStage:
    """Unilateral controlled-source stage built from a device record.

    A non-zero ``l_s`` degenerates the source: with Y_in the gate R||C,
    Z_in = 1/Y_in + jw Ls (1 + gm / Y_in) and the output current is
    gm * v_gs.  Differential stages use the half-circuit gm / 2.
    """

    record: DeviceRecord
    l_s: float = 0.0  # pH

    @property
    def gm(self) -> float:
        gm = self.record.gm * 1e-3
        return gm / 2.0 if self.record.kind is DeviceKind.DIFF_CS else gm

    def y_in(self, omega):
        return 1.0 / self.record.rin + 1j * omega * self.record.cin * 1e-15

    def z_in(self, omega):
        yin = self.y_in(omega)
        return 1.0 / yin + 1j * omega * self.l_s * 1e-12 * (1.0 + self.gm / yin)

    def y_out(self, omega):
        return 1.0 / self.record.rs_out + 1j * omega * self.record.cs_out * 1e-15

    def abcd(self, omega):
        zin = self.z_in(omega)
        y21 = self.gm / (self.y_in(omega) * zin)
        return _abcd_from_y(1.0 / zin, np.zeros_like(zin), y21, self.y_out(omega))

    def elements(self, a, b, tag):
        r = self.record
        src = f"{tag}.s" if self.l_s > 0 else "0"
        els = [
            ("R", f"{tag}.rin", a, src, r.rin),
            ("C", f"{tag}.cin", a, src, r.cin * 1e-15),
            ("G", f"{tag}.gm", b, src, a, src, self.gm),
            ("R", f"{tag}.ro", b, "0", r.rs_out),
            ("C", f"{tag}.co", b, "0", r.cs_out * 1e-15),
        ]
        if self.l_s > 0:
            els.append(("L", f"{tag}.ls", src, "0", self.l_s * 1e-12))
        return els


@dataclass
class Chain:
    blocks: list
    stage_index: list = field(default_factory=list)  # block indices of active stages
    mcr_index: list = field(default_factory=list)

    def __len__(self):
        return len(self.blocks)

    @property
    def stages(self) -> list:
        return [self.blocks[i] for i in self.stage_index]

    def abcd_stack(self, omega):
        stack = np.stack([b.abcd(omega) for b in self.blocks])
        if not np.all(np.isfinite(stack)):
            bad = np.nonzero(~np.all(np.isfinite(stack), axis=(0, 2, 3)))[0][0]
            raise SingularNetwork("non-finite block matrix", omega[bad] / (2e9 * np.pi))
        return stack

    def netlist(self):
        """Flatten into lumped elements; ports are nodes "in" and "out"."""
        nodes = ["in"] + [f"n{i}" for i in range(1, len(self.blocks))] + ["out"]
        els = []
        for i, blk in enumerate(self.blocks):
            els.extend(blk.elements(nodes[i], nodes[i + 1], f"b{i}"))
        return els


# -- candidate --------------------------------------------------------------


@dataclass(frozen=True)
class CandidateDesign:
    x1: tuple  # (w1, w2, w3 [um], vgs1, vgs2, vgs3 [mV]); n widths then n biases in general
    x2: tuple  # one MCRPhysical per stage
    x3: tuple  # (l_par, l_g, l_s) [pH]
    meta: dict = field(default_factory=dict, compare=False, hash=False)

    DIM = 30  # for the default three stages; 9 n + 3 in general

    def __post_init__(self):
        if len(self.x1) != 2 * len(self.x2) or not self.x2 or len(self.x3) != 3:
            raise AssemblyError("need n widths, n biases, n MCR blocks and three match values", "x")

    @property
    def stages(self) -> int:
        return len(self.x2)

    def vector(self) -> list:
        out = [float(v) for v in self.x1]
        for m in self.x2:
            out.extend(m.as_vector())
        out.extend(float(v) for v in self.x3)
        return out

    @classmethod
    def from_vector(cls, v, meta=None) -> "CandidateDesign":
        v = [float(x) for x in v]
        n, rem = divmod(len(v) - 3, 9)
        if rem or n < 1:
            raise AssemblyError(f"expected 9 n + 3 entries, got {len(v)}", "x")
        x2 = tuple(MCRPhysical.from_vector(v[2 * n + 7 * i: 2 * n + 7 * i + 7]) for i in range(n))
        return cls(tuple(v[:2 * n]), x2, tuple(v[-3:]), dict(meta or {}))

    @property
    def l_par(self):
        return self.x3[0]

    @property
    def l_g(self):
        return self.x3[1]

    @property
    def l_s(self):
        return self.x3[2]

    def digest(self) -> str:
        blob = json.dumps([round(x, 9) for x in self.vector()]).encode()
        return hashlib.sha1(blob).hexdigest()[:16]

    def to_dict(self) -> dict:
        n = self.stages
        return {
            "x1": {"w": list(self.x1[:n]), "vgs": list(self.x1[n:])},
            "x2": [asdict(m) for m in self.x2],
            "x3": {"l_par": self.x3[0], "l_g": self.x3[1], "l_s": self.x3[2]},
            "meta": dict(self.meta),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CandidateDesign":
        def need(obj, key, path):
            if not isinstance(obj, dict) or key not in obj:
                raise AssemblyError("missing field", path)
            return obj[key]

        x1 = need(data, "x1", "x1")
        w = need(x1, "w", "x1.w")
        v = need(x1, "vgs", "x1.vgs")
        if len(w) != len(v) or not w:
            raise AssemblyError("expected one width and one bias per stage", "x1")
        x2_raw = need(data, "x2", "x2")
        if len(x2_raw) != len(w):
            raise AssemblyError(f"expected {len(w)} MCR blocks", "x2")
        x2 = []
        for i, m in enumerate(x2_raw):
            vals = [need(m, key, f"x2[{i}].{key}") for key in ("k", "l1", "l2", "r1", "r2", "c1", "c2")]
            x2.append(MCRPhysical.from_vector(vals))
        x3 = need(data, "x3", "x3")
        vals3 = tuple(float(need(x3, key, f"x3.{key}")) for key in ("l_par", "l_g", "l_s"))
        return cls(tuple(float(x) for x in list(w) + list(v)), tuple(x2), vals3, dict(data.get("meta", {})))


def _lookup(tables, kind, width, vbias, path):
    rec = find_record(tables[kind], width, vbias)
    if rec is None:
        raise UnknownDevice(f"{path}: ({width} um, {vbias} mV) is not on the {kind.value} grid")
    return rec


def stage_records(candidate: CandidateDesign, tables=None) -> list:
    tables = default_tables() if tables is None else tables
    n = candidate.stages
    w, v = candidate.x1[:n], candidate.x1[n:]
    kinds = [DeviceKind.CASCODE] + [DeviceKind.DIFF_CS] * (n - 1)
    return [_lookup(tables, kinds[i], w[i], v[i], f"x1[{i}]") for i in range(n)]


def assemble(candidate: CandidateDesign, tables=None, load: LoadModel | None = None) -> Chain:
    load = LoadModel() if load is None else load
    recs = stage_records(candidate, tables)
    blocks = [LMatch(candidate.l_par, candidate.l_g)]
    for i, (rec, m) in enumerate(zip(recs, candidate.x2)):
        blocks += [ActiveStage(rec, candidate.l_s if i == 0 else 0.0), MCRBlock(m)]
    blocks.append(ShuntRC(load.r_load, load.c_load))
    n = len(recs)
    return Chain(blocks, stage_index=[1 + 2 * i for i in range(n)], mcr_index=[2 + 2 * i for i in range(n)])


def assemble_subchain(records: Sequence[DeviceRecord], mcr1: MCRPhysical, l_s: float,
                      match: tuple | None = None, load: LoadModel | None = None) -> Chain:
    """First two stages with the first MCR between them; optional input match."""
    load = LoadModel() if load is None else load
    blocks = [] if match is None else [LMatch(*match)]
    off = len(blocks)
    blocks += [ActiveStage(records[0], l_s), MCRBlock(mcr1), ActiveStage(records[1]),
               ShuntRC(load.r_load, load.c_load)]
    return Chain(blocks, stage_index=[off, off + 2], mcr_index=[off + 1])


# -- analysis ---------------------------------------------------------------


@dataclass
class Analysis:
    freqs: np.ndarray
    states: np.ndarray  # (nblocks+1, nf, 2) for V_out = 1
    vs: np.ndarray  # source EMF producing V_out = 1
    zin: np.ndarray
    zout: np.ndarray

    @property
    def voltage_gain(self):
        return 2.0 / self.vs

    @property
    def gamma_in(self):
        return (self.zin - Z0) / (self.zin + Z0)

    @property
    def gamma_out(self):
        return (self.zout - Z0) / (self.zout + Z0)


def _db20(x):
    return 20.0 * np.log10(np.maximum(np.abs(x), 10 ** (S_FLOOR_DB / 20)))


def analyze(chain: Chain, freqs_ghz) -> Analysis:
    freqs = np.atleast_1d(np.asarray(freqs_ghz, dtype=float))
    if freqs.size == 0:
        raise ValueError("empty frequency grid")
    omega = _omega(freqs)
    stack = chain.abcd_stack(omega)
    states = kernels.chain_backsolve(stack)
    v1, i1 = states[0, :, 0], states[0, :, 1]
    vs = v1 + Z0 * i1
    if np.any(np.abs(vs) == 0) or not np.all(np.isfinite(vs)):
        bad = int(np.argmin(np.abs(vs)))
        raise SingularNetwork("cascade transfer is singular", freqs[bad])
    with np.errstate(divide="ignore", invalid="ignore"):
        zin = np.where(i1 == 0, np.inf + 0j, v1 / i1)
    core = stack[:-1] if isinstance(chain.blocks[-1], ShuntRC) else stack
    zout = kernels.impedance_forward(core, Z0) if len(core) else np.full(freqs.size, Z0 + 0j)
    return Analysis(freqs, states, vs, zin, zout)


def small_signal(chain: Chain, freq_grid):
    """(gain_db, s11_db, s22_db) over ``freq_grid`` in GHz."""
    a = analyze(chain, freq_grid)
    with np.errstate(invalid="ignore"):
        g_in = np.where(np.isinf(a.zin.real), 1.0, a.gamma_in)
    return _db20(a.voltage_gain), _db20(g_in), _db20(a.gamma_out)


def transducer_gain(chain: Chain, freq_grid, load_admittance) -> np.ndarray:
    """Power delivered to the final shunt load over the available source power."""
    a = analyze(chain, freq_grid)
    y_load = np.asarray(load_admittance(_omega(a.freqs)))
    p_load = np.real(y_load)  # |V_out|^2 = 1
    p_avail = np.abs(a.vs) ** 2 / (4 * Z0)
    return p_load / p_avail


def stage_gains(chain: Chain, a: Analysis) -> np.ndarray:
    """Per-stage dB gain curves that sum to the total gain.

    Stage i spans its input node to the next stage's input (the output node
    for the last stage); the first stage is referenced to V_s / 2.
    """
    v = a.states[:, :, 0]
    bounds = list(chain.stage_index) + [len(chain.blocks)]
    if isinstance(chain.blocks[-1], ShuntRC):
        bounds[-1] = len(chain.blocks) - 1
    out = []
    for i in range(len(chain.stage_index)):
        start = a.vs / 2.0 if i == 0 else v[bounds[i]]
        out.append(_db20(v[bounds[i + 1]] / start))
    return np.array(out)


def mcr_losses(chain: Chain, a: Analysis) -> list:
    """Linear power loss P_in / P_out of each MCR block."""
    out = []
    for m in chain.mcr_index:
        vi, ii = a.states[m, :, 0], a.states[m, :, 1]
        vo, io = a.states[m + 1, :, 0], a.states[m + 1, :, 1]
        p_in = np.real(vi * np.conj(ii))
        p_out = np.real(vo * np.conj(io))
        out.append(np.where(p_out > 0, p_in / np.where(p_out > 0, p_out, 1.0), np.inf))
    return out


def thevenin_impedances(chain: Chain, a: Analysis) -> list:
    """Impedance seen looking back from each stage input toward the source.

    Stages are unilateral, so behind stage i > 0 sits only the previous
    stage's output admittance and the passive blocks in between.
    """
    omega = _omega(a.freqs)
    out = []
    for i, idx in enumerate(chain.stage_index):
        start = 0 if i == 0 else chain.stage_index[i - 1]
        z = np.full(a.freqs.shape, Z0 + 0j)
        for blk in chain.blocks[start:idx]:
            m = blk.abcd(omega)
            z = (m[:, 1, 1] * z + m[:, 0, 1]) / (m[:, 1, 0] * z + m[:, 0, 0])
        out.append(z)
    return out


def _stage_noise_factors(chain: Chain, a: Analysis):
    """Per-stage noise factors referred to a 50 ohm reference at each stage input.

    Stage 1 pays the input mismatch penalty c_mm |Gamma_in|^2.  Later stages
    add the thermal noise of the passive network behind them, which by
    Nyquist equals 4kT Re(Z_th) and so contributes Re(Z_th) / 50.
    """
    recs = [s.record for s in chain.stages]
    gamma = np.where(np.isinf(a.zin.real), 1.0, a.gamma_in)
    z_th = thevenin_impedances(chain, a)
    factors = []
    for i, rec in enumerate(recs):
        f = 10 ** (rec.nf_min / 10.0) * np.ones(a.freqs.shape)
        if i == 0:
            f = f + C_MISMATCH * np.abs(gamma) ** 2
        else:
            f = f + np.maximum(z_th[i].real, 0.0) / Z0
        factors.append(f)
    return factors


def _friis(factors, gains_db):
    total = np.array(factors[0], dtype=float)
    g_acc = np.ones_like(total)
    for i in range(1, len(factors)):
        g_acc = g_acc * 10 ** (gains_db[i - 1] / 10.0)
        total = total + (factors[i] - 1.0) / g_acc
    return total


def noise_figure(chain: Chain, f_ghz) -> float:
    a = analyze(chain, [f_ghz])
    factors = _stage_noise_factors(chain, a)
    return float(10 * np.log10(_friis(factors, stage_gains(chain, a))[0]))


def _compression(p_dbm, gains_db):
    inv = np.zeros_like(np.asarray(gains_db[0], dtype=float))
    g_acc = np.ones_like(inv)
    for i, p in enumerate(p_dbm):
        if i > 0:
            g_acc = g_acc * 10 ** (gains_db[i - 1] / 10.0)
        inv = inv + g_acc / 10 ** (p / 10.0)
    return 10 * np.log10(1.0 / inv)


def compression(chain: Chain, f_ghz) -> tuple[float, float]:
    """(IP1dB, OP1dB) in dBm at ``f_ghz``."""
    a = analyze(chain, [f_ghz])
    gains = stage_gains(chain, a)
    ip = float(_compression([s.record.ip1db_stage for s in chain.stages], gains)[0])
    return ip, ip + float(_db20(a.voltage_gain)[0]) - 1.0


# -- report -----------------------------------------------------------------

CHECKS = ("gain", "ripple", "nf", "ip1db", "s11", "power")


@dataclass
class SimReport:
    freq_grid: list
    gain_db: list
    s11_db: list
    s22_db: list
    nf_db: float
    nf_curve_db: list
    ip1db_dbm: float
    op1db_dbm: float
    per_stage_gain_db: list
    per_stage_nf_db: list
    per_stage_ip1db_dbm: list
    pass_flags: dict
    violations: dict
    hf_eval_count_delta: int = 1
    power_ma: float = 0.0
    fc_ghz: float = 0.0
    band_ghz: list = field(default_factory=list)
    head_gain_db: list = field(default_factory=list)
    error: str = ""

    @property
    def passed(self) -> bool:
        return not self.error and all(self.pass_flags.values())

    @property
    def in_band(self) -> np.ndarray:
        f = np.asarray(self.freq_grid)
        lo, hi = self.band_ghz
        tol = 1e-9 * self.fc_ghz
        return (f >= lo - tol) & (f <= hi + tol)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "SimReport":
        return cls(**data)


def violations_for(spec: DesignSpec, gain_band, s11_band, nf, ip1db, power) -> dict:
    gmin, gmax = float(np.min(gain_band)), float(np.max(gain_band))
    return {
        "gain": max(0.0, abs(spec.gain - gmin) - GAIN_TOL_DB) if math.isfinite(spec.gain) else 0.0,
        "ripple": max(0.0, gmax - gmin - RIPPLE_DB),
        "nf": max(0.0, nf - spec.nf_max),
        "ip1db": max(0.0, spec.ip1db_min - ip1db),
        "s11": max(0.0, float(np.max(s11_band)) - S11_BAND_MAX_DB),
        "power": max(0.0, power - spec.power),
    }


def _relaxed(spec: DesignSpec, name: str) -> bool:
    """Whether a check is vacuous because its threshold is infinite."""
    return {
        "gain": not math.isfinite(spec.gain),
        "ripple": not math.isfinite(spec.gain),
        "nf": spec.nf_max == math.inf,
        "ip1db": spec.ip1db_min == -math.inf,
        "s11": not math.isfinite(spec.gain) and spec.nf_max == math.inf,
        "power": spec.power == math.inf,
    }[name]


def chain_report(chain: Chain, spec: DesignSpec, count: bool = True) -> SimReport:
    """Evaluate an assembled chain against ``spec``; counts one HF evaluation."""
    if count:
        HF_COUNTER.increment()
    grid = spec.freq_grid()
    mid = len(grid) // 2
    band = spec.band_mask(grid)
    a = analyze(chain, grid)
    gain = _db20(a.voltage_gain)
    g_in = np.where(np.isinf(a.zin.real), 1.0, a.gamma_in)
    s11 = _db20(g_in)
    s22 = _db20(a.gamma_out)
    sg = stage_gains(chain, a)
    factors = _stage_noise_factors(chain, a)
    nf_curve = 10 * np.log10(_friis(factors, sg))
    stage_ip = [s.record.ip1db_stage for s in chain.stages]
    ip = float(_compression(stage_ip, [g[mid:mid + 1] for g in sg])[0])
    power = sum(s.record.id for s in chain.stages)
    viol = violations_for(spec, gain[band], s11[band], float(nf_curve[mid]), ip, power)
    for name in CHECKS:
        if _relaxed(spec, name):
            viol[name] = 0.0
    return SimReport(
        freq_grid=[float(f) for f in grid],
        gain_db=[float(g) for g in gain],
        s11_db=[float(x) for x in s11],
        s22_db=[float(x) for x in s22],
        nf_db=float(nf_curve[mid]),
        nf_curve_db=[float(x) for x in nf_curve],
        ip1db_dbm=ip,
        op1db_dbm=ip + float(gain[mid]) - 1.0,
        per_stage_gain_db=[float(g[mid]) for g in sg],
        per_stage_nf_db=[float(10 * np.log10(f[mid])) for f in factors],
        per_stage_ip1db_dbm=[float(p) for p in stage_ip],
        pass_flags={k: v == 0.0 for k, v in viol.items()},
        violations=viol,
        hf_eval_count_delta=1 if count else 0,
        power_ma=float(power),
        fc_ghz=float(spec.fc),
        band_ghz=[float(spec.f_low), float(spec.f_high)],
        head_gain_db=[float(x) for x in sg[0]],
    )


def failed_report(spec: DesignSpec, reason: str, count: bool = True) -> SimReport:
    if count:
        HF_COUNTER.increment()
    grid = [float(f) for f in spec.freq_grid()]
    nan = [S_FLOOR_DB] * len(grid)
    return SimReport(
        freq_grid=grid, gain_db=list(nan), s11_db=[0.0] * len(grid), s22_db=[0.0] * len(grid),
        nf_db=math.inf, nf_curve_db=[math.inf] * len(grid), ip1db_dbm=-math.inf,
        op1db_dbm=-math.inf, per_stage_gain_db=[], per_stage_nf_db=[], per_stage_ip1db_dbm=[],
        pass_flags={k: False for k in CHECKS}, violations={k: math.inf for k in CHECKS},
        hf_eval_count_delta=1 if count else 0, fc_ghz=float(spec.fc),
        band_ghz=[float(spec.f_low), float(spec.f_high)], error=reason,
    )


def fullchain_report(candidate: CandidateDesign, spec: DesignSpec, tables=None,
                     load: LoadModel | None = None) -> SimReport:
    load = spec.load if load is None else load
    try:
        chain = assemble(candidate, tables, load)
        return chain_report(chain, spec)
    except (UnknownDevice, SingularNetwork, AssemblyError, ValueError, FloatingPointError) as exc:
        return failed_report(spec, f"{type(exc).__name__}: {exc}")


def dc_power_mw(report: SimReport) -> float:
    return report.power_ma * VDD
