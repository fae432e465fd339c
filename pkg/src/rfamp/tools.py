"""Four-stage tool middleware: active sizing, critical-stage matching, band
planning and full-chain evaluation, plus the L-match synthesizer and the
staged backtracking policy.

Tools are called through ``dispatch`` with a ``ToolCall`` and always answer
with a ``ToolResult``; failures come back as ``ok=False`` with a message.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np

from . import device_kb as dkb
from . import evaluator as ev
from .mcr import MCRParams, MCRPhysical, SourceModel, Unrealizable, chain_gain, to_physical
from .optim import Bounds, CalibrationFailed, Residual, calibrate_multifidelity, pso_minimize, sa_minimize
from .optim.costs import WEIGHT, cost_stage2, shortfall
from .spec import DesignSpec

SCHEMA_VERSION = 1
DEFAULT_HEADROOM = 0.2
HEADROOM_GAIN = 1.0  # headroom added per dB of NF degradation
GAIN_SHIFT_DB = 2.0
LADDER_DEPTH = 3
PLAN_MARGIN_DB = 0.5  # planning targets are tightened by this much
LAND_OFFSET_DB = 2.0  # preferred in-band minimum gain, relative to the target
LAND_WEIGHT = 10.0  # per dB away from the preferred minimum; small next to constraint terms
LOCAL_SA = {"t0": 20.0, "step_scale": 0.03, "steps": 800}

STAGE2_BOUNDS = Bounds.from_pairs(
    [(0.1, 0.7), (100, 1000), (100, 1000), (100, 1000), (100, 1000), (0, 50), (0, 50), (0, 150)],
    units=("", "pH", "pH", "ohm", "ohm", "fF", "fF", "pH"),
    names=("k", "l1", "l2", "r1", "r2", "c1", "c2", "l_s"),
)


class ToolName(str, Enum):
    ACTIVE_SIZING = "ActiveSizing"
    IMPEDANCE_MATCHING = "ImpedanceMatching"
    BAND_PLANNING = "BandPlanning"
    FULLCHAIN_EVAL = "FullchainEval"


class Unmatchable(ValueError):
    pass


class NoFeasibleSolution(RuntimeError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class SchemaError(ValueError):
    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


# -- wire types ---------------------------------------------------------------


@dataclass
class ToolCall:
    tool_name: ToolName
    args: dict
    call_id: str
    timestamp: float = 0.0

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "tool_name": self.tool_name.value,
                "args": self.args, "call_id": self.call_id, "timestamp": self.timestamp}

    @classmethod
    def from_dict(cls, data: dict) -> "ToolCall":
        try:
            name = ToolName(data["tool_name"])
        except (KeyError, ValueError) as exc:
            raise SchemaError(f"unknown tool {data.get('tool_name')!r}", "tool_name") from exc
        if not isinstance(data.get("args"), dict):
            raise SchemaError("expected an object", "args")
        return cls(name, data["args"], str(data.get("call_id", "")), float(data.get("timestamp", 0.0)))


@dataclass
class ToolResult:
    call_id: str
    payload: dict | None
    hf_evals_used: int
    elapsed: float
    ok: bool
    error: str | None = None

    def __post_init__(self):
        if self.ok != (self.error is None):
            raise ValueError("ok must hold exactly when error is absent")

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, **asdict(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "ToolResult":
        data = {k: v for k, v in data.items() if k != "schema_version"}
        return cls(**data)


class ActionKind(str, Enum):
    RERUN_2_TO_4 = "RerunStages2to4"
    REPLAN_3_TIGHTER = "ReplanStage3Tighter"
    RERUN_GLOBAL_GAIN = "RerunStages2to4GlobalGain"
    ESCALATE_STAGE1 = "EscalateStage1"
    ACCEPT = "Accept"
    ABORT = "Abort"


@dataclass(frozen=True)
class BacktrackAction:
    kind: ActionKind
    adjusted_headroom: float | None = None
    gain_constraints: tuple | None = None

    def __post_init__(self):
        if (self.adjusted_headroom is not None) != (self.kind is ActionKind.RERUN_2_TO_4):
            raise ValueError("adjusted_headroom is present exactly for RerunStages2to4")


@dataclass(frozen=True)
class AttemptState:
    """What the backtracking policy needs to remember between attempts."""

    headroom: float = DEFAULT_HEADROOM
    linearity_attempts: int = 0  # consecutive non-noise failures so far
    attempts: int = 0
    max_attempts: int = 6
    stage_gains: tuple = ()  # per-stage gains (dB) of the report being judged

    def next(self, **changes) -> "AttemptState":
        data = asdict(self)
        data.update(changes)
        return AttemptState(**data)


# -- context ------------------------------------------------------------------


@dataclass
class ToolContext:
    """Ambient state the tools need that is not part of any call's arguments."""

    spec: DesignSpec
    tables: dict = field(default_factory=dkb.default_tables)
    seed: int = 0
    pso: dict = field(default_factory=lambda: {"particles": 16, "iters": 40})
    sa: dict = field(default_factory=lambda: {"steps": 1500, "t0": 300.0, "cooling": 0.996,
                                              "step_scale": 0.15})
    mf_rounds: int = 5

    @property
    def grid(self) -> np.ndarray:
        return self.spec.freq_grid()

    @property
    def band(self) -> np.ndarray:
        return self.spec.band_mask(self.grid)


# -- L-match ------------------------------------------------------------------


def l_match(z_in: complex, f0: float) -> tuple[float, float]:
    """Inductor-only L-section (shunt at the source) conjugately matching ``z_in``.

    Returns (l_par, l_g) in pH; l_par = 0 encodes an absent shunt branch.
    Matchable iff Re(z_in) <= 50 and Im(z_in) <= -sqrt(R (50 - R)).
    """
    r, x = float(np.real(z_in)), float(np.imag(z_in))
    if not r > 0:
        raise ValueError("Re(z_in) must be positive")
    w = 2 * math.pi * f0 * 1e9
    if r > ev.Z0 * (1 + 1e-12):
        raise Unmatchable(f"Re(z_in) = {r:.4g} ohm exceeds {ev.Z0:g} ohm; a capacitive branch is needed")
    if r >= ev.Z0:
        b_par, x_src = math.inf, 0.0
    else:
        b_par = ev.Z0 * math.sqrt(r / (ev.Z0 - r))
        x_src = math.sqrt(r * (ev.Z0 - r))
    x_g = -x - x_src
    if x_g < -1e-9 * max(1.0, abs(x)):
        raise Unmatchable(f"Im(z_in) = {x:.4g} ohm needs a series capacitor (limit {-x_src:.4g} ohm)")
    l_par = 0.0 if math.isinf(b_par) else b_par / w * 1e12
    return l_par, max(x_g, 0.0) / w * 1e12


def l_match_best_effort(z_in: complex, f0: float) -> tuple[float, float]:
    """Closest inductor-only network when an exact match is impossible."""
    try:
        return l_match(z_in, f0)
    except Unmatchable:
        r, x = float(np.real(z_in)), float(np.imag(z_in))
        w = 2 * math.pi * f0 * 1e9
        if r >= ev.Z0:
            return 0.0, max(-x, 0.0) / w * 1e12
        b_par = ev.Z0 * math.sqrt(r / (ev.Z0 - r))
        x_g = max(-x - math.sqrt(r * (ev.Z0 - r)), 0.0)
        return b_par / w * 1e12, x_g / w * 1e12


# -- Stage 1: active sizing ---------------------------------------------------


def config_to_dict(cfg: dkb.ActiveConfig) -> dict:
    return {
        "stages": [r.to_dict() for r in cfg.records],
        "power_split": list(cfg.power_split),
        "total_budget": cfg.total_budget,
        "choice": list(cfg.choice),
    }


def records_from_active(active: dict, path: str = "active_params") -> list:
    try:
        stages = active["stages"]
    except (KeyError, TypeError) as exc:
        raise SchemaError("missing field", f"{path}.stages") from exc
    try:
        return [dkb.DeviceRecord.from_dict(s) for s in stages]
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad device record: {exc}", f"{path}.stages") from exc


def tool_active_sizing(ctx: ToolContext, power_ratio_list: Sequence[float]) -> dict:
    configs = dkb.allocate(power_ratio_list, ctx.spec.power, dkb.stage_classes(ctx.spec.stages),
                           ctx.tables)
    return {"power_ratio_list": [float(r) for r in power_ratio_list],
            "active_params_dict_list": [config_to_dict(c) for c in configs]}


# -- Stage 2: critical-stage matching -----------------------------------------


def _mcr1_from_vector(x) -> MCRPhysical:
    return MCRPhysical(*(float(v) for v in x[:7]))


def stage2_evaluate(ctx: ToolContext, records: Sequence, x, headroom: float = DEFAULT_HEADROOM,
                    gain_require: float | None = None, s11_band_max: float | None = None) -> dict:
    """Cost pipeline of the critical-stage search for one 8-D point ``x``.

    (a) input impedance of the unmatched two-stage sub-chain at f_c,
    (b) L-match synthesis, (c) NF and S11 of the matched sub-chain.
    """
    spec = ctx.spec
    mcr1, l_s = _mcr1_from_vector(x), float(x[7])
    bare = ev.assemble_subchain(records, mcr1, l_s, None, spec.load)
    z_in = complex(ev.analyze(bare, [spec.fc]).zin[0])
    matchable = True
    try:
        match = l_match(z_in, spec.fc)
    except (Unmatchable, ValueError):
        matchable = False
        match = l_match_best_effort(z_in, spec.fc) if z_in.real > 0 else (0.0, 0.0)
    chain = ev.assemble_subchain(records, mcr1, l_s, match, spec.load)
    grid = ctx.grid
    a = ev.analyze(chain, grid)
    mid = len(grid) // 2
    g_in = np.where(np.isinf(a.zin.real), 1.0, a.gamma_in)
    s11_curve = ev._db20(g_in)
    sg = ev.stage_gains(chain, a)
    factors = ev._stage_noise_factors(chain, a)
    nf = float(10 * np.log10(ev._friis([f[mid:mid + 1] for f in factors], [g[mid:mid + 1] for g in sg])[0]))
    head = sg[0]
    stage_gain = float(np.min(head[ctx.band]))
    cost = cost_stage2(nf, float(s11_curve[mid]), spec.nf_max, headroom)
    if gain_require is not None:
        cost += shortfall(gain_require, stage_gain)
    s11_band = float(np.max(s11_curve[ctx.band]))
    if s11_band_max is not None:
        cost += WEIGHT * max(0.0, s11_band - s11_band_max)
    ip_est = float(ev._compression([s.record.ip1db_stage for s in chain.stages],
                                   [g[mid:mid + 1] for g in sg])[0])
    return {
        "cost": float(cost), "nf_db": nf, "s11_db": float(s11_curve[mid]), "s11_band_db": s11_band,
        "z_in": [z_in.real, z_in.imag],
        "matchable": matchable, "l_par": match[0], "l_g": match[1], "l_s": l_s, "mcr1": mcr1,
        "head_gain_db": [float(v) for v in head], "s11_curve_db": [float(v) for v in s11_curve],
        "stage_gain_db": stage_gain, "ip1db_est_dbm": ip_est, "chain": chain,
    }


def tool_impedance_matching(ctx: ToolContext, active_params: dict, nf_headroom: float | None = None,
                            gain_require: float | None = None, seed: int | None = None,
                            x0=None, s11_band_max: float | None = None) -> tuple[dict, dict]:
    """PSO over (k, L1, L2, R1, R2, C1, C2, Ls) minimizing the critical-stage cost.

    ``s11_band_max`` optionally bounds the worst in-band S11 as well; the
    first stage is unilateral, so the sub-chain value is the full-chain one.
    Raises NoFeasibleSolution (with the best point attached) when the best
    cost stays positive.
    """
    headroom = DEFAULT_HEADROOM if nf_headroom is None else float(nf_headroom)
    records = records_from_active(active_params)
    if len(records) < 2:
        raise SchemaError("need at least two stages", "active_params.stages")

    def cost(x):
        try:
            return stage2_evaluate(ctx, records, x, headroom, gain_require, s11_band_max)["cost"]
        except (ev.SingularNetwork, ValueError, ZeroDivisionError, FloatingPointError):
            return math.inf

    cfg = {**ctx.pso, "seed": ctx.seed if seed is None else seed, "target": 0.0}
    if x0 is not None:
        cfg["x0"] = x0
    res = pso_minimize(cost, STAGE2_BOUNDS, cfg)
    best = stage2_evaluate(ctx, records, res.best_x, headroom, gain_require, s11_band_max)
    chain = best.pop("chain")
    mcr1 = best.pop("mcr1")
    sub_report = ev.chain_report(chain, ctx.spec, count=False)
    passive = {"x2_1": asdict(mcr1), "l_par": best["l_par"], "l_g": best["l_g"], "l_s": best["l_s"],
               "x": [float(v) for v in res.best_x]}
    sim = {**best, "report": sub_report.to_dict(), "headroom": headroom,
           "gain_require": gain_require, "s11_band_max": s11_band_max, "evals": res.evals}
    out = {"passive_params_cpstages": passive, "sim_result_cpstages": sim}
    if best["cost"] > 0:
        raise NoFeasibleSolution(f"critical-stage cost {best['cost']:.4g} > 0 after {res.evals} evaluations",
                                 out)
    return passive, sim


# -- Stage 3: band planning ---------------------------------------------------


def _mcr_loads(records, load):
    """Per remaining MCR: (driving record, next-stage rin, next-stage cin)."""
    out = []
    for i in range(1, len(records)):
        nxt = records[i + 1] if i + 1 < len(records) else None
        r_next = nxt.rin if nxt else load.r_load
        c_next = nxt.cin if nxt else load.c_load
        out.append((records[i], r_next, c_next))
    return out


def _parallel(a, b):
    return a * b / (a + b)


def lofi_stage(rec: dkb.DeviceRecord, params: MCRParams, r_next: float):
    """Low-fidelity (source, params, r2) for one MCR-loaded gain stage.

    The driver's output resistance folds into the primary tank, its output
    capacitance into the tank capacitance; Q becomes the loaded Q.
    """
    rs = _parallel(params.r_tank, rec.rs_out)
    q_loaded = params.omega0 * params.c * 1e-15 * rs
    lp = MCRParams(params.k, params.omega0, q_loaded, params.c)
    return SourceModel(rec.gm, rs, 0.0), lp, _parallel(params.r_tank, r_next)


def plan_bounds(ctx: ToolContext, records: Sequence) -> Bounds:
    pairs = []
    for rec, _, c_next in _mcr_loads(records, ctx.spec.load):
        c_min = max(rec.cs_out, c_next)
        pairs += [(0.1, 0.8), (ctx.spec.f_low, ctx.spec.f_high), (0.1, 8.0), (c_min, 200.0)]
    return Bounds.from_pairs(pairs)


def params_from_vector(x) -> list:
    return [MCRParams(float(x[i]), 2 * math.pi * float(x[i + 1]) * 1e9, float(x[i + 2]), float(x[i + 3]))
            for i in range(0, len(x), 4)]


def physical_from_vector(records, load, x) -> list:
    out = []
    for p, (rec, _, c_next) in zip(params_from_vector(x), _mcr_loads(records, load)):
        out.append(to_physical(p, (rec.cs_out, c_next)))
    return out


def lofi_curves(ctx: ToolContext, records, head, x):
    """(total curve, per-stage curves) of the low-fidelity model on the grid."""
    omegas = 2 * math.pi * ctx.grid * 1e9
    stages = []
    for p, (rec, r_next, _) in zip(params_from_vector(x), _mcr_loads(records, ctx.spec.load)):
        stages.append(lofi_stage(rec, p, r_next))
    per = [chain_gain([s], np.zeros_like(omegas), omegas) for s in stages]
    return np.asarray(head, dtype=float) + np.sum(per, axis=0), per


def plan_cost(ctx: ToolContext, curve, per_stage, gain_req=None, margin: float = PLAN_MARGIN_DB,
              land: bool = True) -> float:
    g = np.asarray(curve)[ctx.band]
    tol = 3.0 - margin
    gmin, gmax = float(g.min()), float(g.max())
    c = 0.0
    if math.isfinite(ctx.spec.gain):  # an infinite target relaxes both gain checks
        c = WEIGHT * max(0.0, abs(ctx.spec.gain - gmin) - tol) + WEIGHT * max(0.0, gmax - gmin - tol)
        if land:
            c += LAND_WEIGHT * abs(gmin - ctx.spec.gain - LAND_OFFSET_DB)
    if gain_req is not None:
        mid = len(ctx.grid) // 2
        for req, curve_i in zip(gain_req, per_stage):
            c += shortfall(req, float(curve_i[mid]))
    return c


def candidate_from_parts(records, critical: dict, mcrs: Sequence[MCRPhysical], meta=None) -> ev.CandidateDesign:
    x1 = tuple([r.width for r in records] + [r.vbias for r in records])
    mcr1 = MCRPhysical(**critical["x2_1"])
    x3 = (float(critical["l_par"]), float(critical["l_g"]), float(critical["l_s"]))
    return ev.CandidateDesign(x1, (mcr1, *mcrs), x3, dict(meta or {}))


def tool_band_planning(ctx: ToolContext, active_params: dict, gain_list, gain_req_list=None,
                       critical: dict | None = None, seed: int | None = None, x0=None,
                       residual0=None) -> tuple[dict, dict]:
    """SA over the remaining MCRs' (k, f0, Q0, C) with HF residual calibration.

    ``critical`` carries the matched first stage (passive_params_cpstages)
    so the expensive check can assemble the whole chain.  ``x0`` and
    ``residual0`` warm-start the plan from an earlier design; with both the
    first round already runs the local search.
    """
    if critical is None:
        raise SchemaError("band planning needs the critical-stage passives", "critical")
    records = records_from_active(active_params)
    head = np.asarray(gain_list, dtype=float)
    if head.shape != ctx.grid.shape:
        raise SchemaError(f"expected {ctx.grid.size} points", "gain_list")
    req = None if gain_req_list is None else [float(v) for v in gain_req_list]
    if req is not None and all(v == -math.inf for v in req):
        req = None
    bounds = plan_bounds(ctx, records)
    res0 = None
    if residual0 is not None:
        vals = np.asarray(residual0, dtype=float)
        if vals.shape != head.shape:
            raise SchemaError(f"expected {ctx.grid.size} points", "residual0")
        res0 = Residual(ctx.grid, vals)
    base_seed = ctx.seed if seed is None else seed
    last = {"x": None if x0 is None else bounds.clip(x0), "report": None, "round": 0}

    def planner(residual):
        corr = np.zeros_like(head) if residual is None else residual.values

        def cost(x):
            curve, per = lofi_curves(ctx, records, head, x)
            return plan_cost(ctx, curve + corr, per, req)

        cfg = {**ctx.sa, "seed": base_seed + 7919 * last["round"], "target": 0.0}
        if last["x"] is not None:
            cfg["x0"] = last["x"]
        if residual is not None and last["x"] is not None:
            # the residual is only trusted near the point it was measured at
            cfg.update(LOCAL_SA)
        last["round"] += 1
        res = sa_minimize(cost, bounds, cfg)
        last["x"] = res.best_x
        return res.best_x

    def lofi(x):
        return lofi_curves(ctx, records, head, x)[0]

    def hifi(x):
        try:
            mcrs = physical_from_vector(records, ctx.spec.load, x)
        except Unrealizable:
            ev.HF_COUNTER.increment()
            return np.full(head.shape, ev.S_FLOOR_DB)
        cand = candidate_from_parts(records, critical, mcrs)
        report = ev.fullchain_report(cand, ctx.spec, ctx.tables)
        last["report"], last["candidate"] = report, cand
        return np.asarray(report.gain_db)

    def accept(curve):
        g = np.asarray(curve)[ctx.band]
        ok = plan_cost(ctx, curve, [], None, margin=0.0, land=False) == 0.0
        if req is not None and last["report"] is not None:
            ok = ok and all(last["report"].per_stage_gain_db[i + 1] >= r - 1e-9 for i, r in enumerate(req))
        return ok and g.size > 0

    converged = True
    try:
        result = calibrate_multifidelity(lofi, hifi, planner, ctx.mf_rounds, grid=ctx.grid, accept=accept,
                                         residual0=res0)
    except CalibrationFailed as exc:
        result, converged = exc.result, False
    x = np.asarray(result.params)
    mcrs = physical_from_vector(records, ctx.spec.load, x)
    report = last["report"]
    hf = np.asarray(result.final_curve)
    band = hf[ctx.band]
    cal_curve = lofi(x) + result.residual_history[-1].values
    passive = {f"x2_{i + 2}": asdict(m) for i, m in enumerate(mcrs)}
    passive["abstract"] = [float(v) for v in x]
    cal = {
        "freq_grid": [float(f) for f in ctx.grid],
        "cal_gain_db": [float(v) for v in cal_curve],
        "hf_gain_db": [float(v) for v in hf],
        "hf_ripple_db": float(band.max() - band.min()),
        "hf_min_gain_db": float(band.min()),
        "hf_calls": result.hf_calls,
        "converged": converged,
        "residual_history": [[float(v) for v in r.values] for r in result.residual_history],
        "hf_report": report.to_dict() if report is not None else None,
        "omega0_ghz": [float(x[i + 1]) for i in range(0, len(x), 4)],
    }
    if not converged:
        err = CalibrationFailed(result)
        err.payload = (passive, cal)
        raise err
    return passive, cal


# -- Stage 4: full-chain evaluation and backtracking --------------------------


def tool_fullchain_eval(ctx: ToolContext, wholechain_active: dict, wholechain_passive: dict) -> dict:
    data = {"x1": wholechain_active.get("x1") if isinstance(wholechain_active, dict) else None}
    if data["x1"] is None:
        raise ev.AssemblyError("missing field", "x1")
    for key in ("x2", "x3"):
        if not isinstance(wholechain_passive, dict) or key not in wholechain_passive:
            raise ev.AssemblyError("missing field", key)
        data[key] = wholechain_passive[key]
    cand = ev.CandidateDesign.from_dict(data)
    report = ev.fullchain_report(cand, ctx.spec, ctx.tables)
    return {"sim_results_dict": report.to_dict()}


def candidate_to_wholechain(cand: ev.CandidateDesign) -> tuple[dict, dict]:
    d = cand.to_dict()
    return {"x1": d["x1"]}, {"x2": d["x2"], "x3": d["x3"]}


def backtrack_decide(report: ev.SimReport, spec: DesignSpec, attempt: AttemptState) -> BacktrackAction:
    """Staged backtracking; a pure function of its arguments."""
    if report.passed:
        return BacktrackAction(ActionKind.ACCEPT)
    if attempt.attempts >= attempt.max_attempts:
        return BacktrackAction(ActionKind.ABORT)
    if report.violations.get("nf", 0.0) > 0:
        degradation = report.nf_db - spec.nf_max
        return BacktrackAction(ActionKind.RERUN_2_TO_4,
                               adjusted_headroom=attempt.headroom + HEADROOM_GAIN * degradation)
    if attempt.linearity_attempts == 0:
        gains = list(attempt.stage_gains or report.per_stage_gain_db)
        if len(gains) < 2:
            return BacktrackAction(ActionKind.RERUN_GLOBAL_GAIN)
        return BacktrackAction(ActionKind.REPLAN_3_TIGHTER, gain_constraints=tuple(_shift_gain(gains)))
    if attempt.linearity_attempts == 1:
        return BacktrackAction(ActionKind.RERUN_GLOBAL_GAIN)
    return BacktrackAction(ActionKind.ESCALATE_STAGE1)


def _shift_gain(gains: Sequence[float]) -> list:
    """Per-stage floors for the planned stages with GAIN_SHIFT_DB moved onto the last one.

    Only stages after the first are planned, so the list has one entry per
    remaining stage; the earlier planned stages get no floor.
    """
    planned = list(gains[1:])
    floors = [-math.inf] * len(planned)
    floors[-1] = planned[-1] + GAIN_SHIFT_DB
    return floors


# -- dispatch and transcripts -------------------------------------------------


_REQUIRED = {
    ToolName.ACTIVE_SIZING: ("power_ratio_list",),
    ToolName.IMPEDANCE_MATCHING: ("active_params",),
    ToolName.BAND_PLANNING: ("active_params", "gain_list", "critical"),
    ToolName.FULLCHAIN_EVAL: ("wholechain_active", "wholechain_passive"),
}
_OPTIONAL = {
    ToolName.ACTIVE_SIZING: (),
    ToolName.IMPEDANCE_MATCHING: ("nf_headroom", "gain_require", "seed", "x0", "s11_band_max"),
    ToolName.BAND_PLANNING: ("gain_req_list", "seed", "x0", "residual0"),
    ToolName.FULLCHAIN_EVAL: (),
}


def validate(call: ToolCall) -> None:
    args = call.args
    for key in _REQUIRED[call.tool_name]:
        if key not in args:
            raise SchemaError("missing field", f"args.{key}")
    unknown = set(args) - set(_REQUIRED[call.tool_name]) - set(_OPTIONAL[call.tool_name])
    if unknown:
        raise SchemaError(f"unexpected fields {sorted(unknown)}", "args")
    if call.tool_name is ToolName.ACTIVE_SIZING:
        ratios = args["power_ratio_list"]
        if not isinstance(ratios, list) or not all(isinstance(r, (int, float)) for r in ratios):
            raise SchemaError("expected a list of numbers", "args.power_ratio_list")


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_json_safe(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def dispatch(call: ToolCall, ctx: ToolContext) -> ToolResult:
    """Validate and run one tool call; never raises for tool-level failures."""
    start = time.perf_counter()
    hf0 = ev.HF_COUNTER.value
    try:
        validate(call)
        a = call.args
        if call.tool_name is ToolName.ACTIVE_SIZING:
            payload = tool_active_sizing(ctx, a["power_ratio_list"])
        elif call.tool_name is ToolName.IMPEDANCE_MATCHING:
            passive, sim = tool_impedance_matching(ctx, a["active_params"], a.get("nf_headroom"),
                                                   a.get("gain_require"), a.get("seed"), a.get("x0"),
                                                   a.get("s11_band_max"))
            payload = {"passive_params_cpstages": passive, "sim_result_cpstages": sim}
        elif call.tool_name is ToolName.BAND_PLANNING:
            passive, cal = tool_band_planning(ctx, a["active_params"], a["gain_list"], a.get("gain_req_list"),
                                              a["critical"], a.get("seed"), a.get("x0"),
                                              a.get("residual0"))
            payload = {"passive_params_dict": passive, "cal_gain_dict": cal}
        else:
            payload = tool_fullchain_eval(ctx, a["wholechain_active"], a["wholechain_passive"])
        return ToolResult(call.call_id, _json_safe(payload), ev.HF_COUNTER.value - hf0,
                          time.perf_counter() - start, True)
    except NoFeasibleSolution as exc:
        return ToolResult(call.call_id, _json_safe(exc.best), ev.HF_COUNTER.value - hf0,
                          time.perf_counter() - start, False, f"NoFeasibleSolution: {exc}")
    except CalibrationFailed as exc:
        passive, cal = getattr(exc, "payload", (None, None))
        payload = None if passive is None else {"passive_params_dict": passive, "cal_gain_dict": cal}
        return ToolResult(call.call_id, _json_safe(payload), ev.HF_COUNTER.value - hf0,
                          time.perf_counter() - start, False, f"CalibrationFailed: {exc}")
    except Exception as exc:  # every other failure becomes an ok=False result
        return ToolResult(call.call_id, None, ev.HF_COUNTER.value - hf0,
                          time.perf_counter() - start, False, f"{type(exc).__name__}: {exc}")


class ToolBox:
    """``dispatch`` bound to one context, honouring a cap on expensive evaluations."""

    def __init__(self, ctx: ToolContext):
        self.ctx = ctx

    def __call__(self, call: ToolCall, hf_remaining: float = math.inf) -> ToolResult:
        ctx = self.ctx
        if call.tool_name in (ToolName.BAND_PLANNING, ToolName.FULLCHAIN_EVAL):
            if hf_remaining < 1:
                return ToolResult(call.call_id, None, 0, 0.0, False,
                                  "BudgetExhausted: no expensive evaluations left")
            rounds = int(min(ctx.mf_rounds, hf_remaining))
            if rounds != ctx.mf_rounds:
                ctx = replace(ctx, mf_rounds=rounds)
        return dispatch(call, ctx)


def write_jsonl(path, records) -> None:
    with open(path, "a") as fh:
        for rec in records:
            fh.write(json.dumps(_json_safe(rec.to_dict() if hasattr(rec, "to_dict") else rec),
                                sort_keys=True) + "\n")


def read_jsonl(path) -> list:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
