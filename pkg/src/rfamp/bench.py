"""Benchmark harness: suite loading, the agent pipeline against flat-search
baselines under one expensive-evaluation cap, the figure of merit, and the
gain-ladder self-evolution run."""

from __future__ import annotations

import json
import math
import tempfile
import time
from dataclasses import asdict, dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

import numpy as np

from . import evaluator as ev
from . import tools as T
from .agents import Mode, run_pipeline
from .device_kb import VDD
from .memory import MemoryStore
from .optim import Bounds, bo_minimize, ga_minimize
from .spec import DesignSpec, SpecError

MATCH_L_MAX_PH = 2000.0
PENALTY = 1e6
DEFAULT_SPLIT = (0.35, 0.35, 0.3)


class Method(str, Enum):
    AGENT = "Agent"
    GA_VANILLA = "GAVanilla"
    BO_VANILLA = "BOVanilla"
    GA_SUBTOOL = "GASubtool"
    BO_SUBTOOL = "BOSubtool"
    GA_WTOOL = "GAWtool"
    BO_WTOOL = "BOWtool"


# -- suites -------------------------------------------------------------------


def load_suite(path=None) -> list:
    """Specs of a suite file ({"specs": [...]}); defaults to the shipped benchmark."""
    if path is None:
        text = resources.files("rfamp.data").joinpath("benchmark.json").read_text()
        where = "benchmark.json"
    else:
        where = str(path)
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise SpecError(str(exc), where) from exc
    if not text.strip():
        raise SpecError("empty suite file", where)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"not JSON: {exc}", where) from exc
    rows = data.get("specs") if isinstance(data, dict) else None
    if not isinstance(rows, list) or not rows:
        raise SpecError("expected a non-empty list", "specs")
    return [DesignSpec.from_dict(row, f"specs[{i}]") for i, row in enumerate(rows)]


def shipped_suite(name: str = "benchmark") -> list:
    text = resources.files("rfamp.data").joinpath(f"{name}.json").read_text()
    return [DesignSpec.from_dict(r, f"specs[{i}]") for i, r in enumerate(json.loads(text)["specs"])]


# -- figure of merit ----------------------------------------------------------


def fom(report: ev.SimReport, spec: DesignSpec) -> float:
    """G * BW[GHz] / ((F - 1) * P_dc[mW]).

    G is the linear power gain at the in-band minimum, F the linear noise
    factor at f_c and P_dc the supply current times VDD.
    """
    g = np.asarray(report.gain_db)[report.in_band]
    gain_lin = 10 ** (float(g.min()) / 10)
    f_lin = 10 ** (report.nf_db / 10)
    p_mw = report.power_ma * VDD
    bw = report.band_ghz[1] - report.band_ghz[0]
    return gain_lin * bw / ((f_lin - 1.0) * p_mw)


def fom_value(gain_db: float, bw_ghz: float, nf_db: float, p_mw: float) -> float:
    return 10 ** (gain_db / 10) * bw_ghz / ((10 ** (nf_db / 10) - 1.0) * p_mw)


# -- baselines ----------------------------------------------------------------


class _Stop(Exception):
    pass


@dataclass
class RunRecord:
    success: bool
    hf_evals: int
    elapsed: float
    tokens: dict = field(default_factory=lambda: {"prompt": 0, "completion": 0})
    fom: float | None = None
    invalid: bool = False
    reason: str = ""
    report: dict | None = None


class _Objective:
    """Expensive objective with a hard evaluation cap and wall-clock limit."""

    def __init__(self, spec, hf_cap, timeout_s):
        self.spec = spec
        self.cap = hf_cap
        self.deadline = time.perf_counter() + timeout_s
        self.hf0 = ev.HF_COUNTER.value
        self.best = None  # passing report, if any
        self.best_cost = math.inf

    @property
    def used(self):
        return ev.HF_COUNTER.value - self.hf0

    def check(self, need=1):
        if self.best is not None or self.used + need > self.cap or time.perf_counter() > self.deadline:
            raise _Stop()

    def score(self, report: ev.SimReport) -> float:
        if report.error:
            return PENALTY
        c = float(sum(v for v in report.violations.values() if math.isfinite(v)))
        c = c if all(math.isfinite(v) for v in report.violations.values()) else PENALTY
        if c < self.best_cost:
            self.best_cost = c
        if report.passed:
            self.best = report
        return c


def _vanilla_parts(ctx: T.ToolContext):
    act = T.tool_active_sizing(ctx, list(DEFAULT_SPLIT))["active_params_dict_list"][0]
    records = T.records_from_active(act)
    plan = T.plan_bounds(ctx, records)
    return act, records, plan


def _flat_bounds(plan: Bounds, with_match: bool) -> Bounds:
    lo = list(T.STAGE2_BOUNDS.lo) + list(plan.lo)
    hi = list(T.STAGE2_BOUNDS.hi) + list(plan.hi)
    if with_match:
        lo += [0.0, 0.0]
        hi += [MATCH_L_MAX_PH, MATCH_L_MAX_PH]
    return Bounds(np.asarray(lo, float), np.asarray(hi, float))


def _flat_eval(ctx, records, x, obj: _Objective, with_match: bool) -> float:
    obj.check()
    x = np.asarray(x, dtype=float)
    s2, mcr_x = x[:8], x[8:16]
    if with_match:
        l_par, l_g = float(x[16]), float(x[17])
    else:
        try:
            m = T.stage2_evaluate(ctx, records, s2)
        except (ev.SingularNetwork, ValueError, ZeroDivisionError):
            return PENALTY
        l_par, l_g = m["l_par"], m["l_g"]
    try:
        mcrs = T.physical_from_vector(records, ctx.spec.load, mcr_x)
    except ValueError:
        ev.HF_COUNTER.increment()  # the expensive run still happens and fails
        return PENALTY
    critical = {"x2_1": asdict(T._mcr1_from_vector(s2)), "l_par": l_par, "l_g": l_g, "l_s": float(s2[7])}
    cand = T.candidate_from_parts(records, critical, mcrs)
    return obj.score(ev.fullchain_report(cand, ctx.spec, ctx.tables))


def _wtool_bounds() -> Bounds:
    # (first-stage share of the non-third budget, third share, head gain target, headroom, config)
    return Bounds.from_pairs([(0.3, 0.7), (0.2, 0.5), (0.0, 15.0), (0.0, 1.0), (0.0, 3.999)])


def _wtool_eval(ctx, x, obj: _Objective) -> float:
    obj.check()
    a, third, greq, headroom, ci = (float(v) for v in x)
    ratios = [(1 - third) * a, (1 - third) * (1 - a), third]
    try:
        configs = T.tool_active_sizing(ctx, ratios)["active_params_dict_list"]
        act = configs[min(int(ci), len(configs) - 1)]
        passive, sim = T.tool_impedance_matching(ctx, act, headroom, greq, s11_band_max=-10.0)
    except (T.NoFeasibleSolution, ValueError):
        return PENALTY
    rounds = int(min(ctx.mf_rounds, obj.cap - obj.used))
    if rounds < 1:
        raise _Stop()
    sub = T.ToolContext(ctx.spec, ctx.tables, ctx.seed, ctx.pso, ctx.sa, rounds)
    try:
        _, cal = T.tool_band_planning(sub, act, sim["head_gain_db"], None, passive)
    except T.CalibrationFailed as exc:
        cal = exc.payload[1]
    except ValueError:
        return PENALTY
    rep = cal.get("hf_report")
    return PENALTY if rep is None else obj.score(ev.SimReport.from_dict(rep))


def run_baseline(method: Method, spec: DesignSpec, seed: int, hf_cap: int, timeout_s: float,
                 cfg: dict | None = None) -> RunRecord:
    cfg = cfg or {}
    ctx = T.ToolContext(spec, seed=seed)
    obj = _Objective(spec, hf_cap, timeout_s)
    start = time.perf_counter()
    ga_cfg = {**cfg.get("optim", {}).get("ga", {}), "seed": seed, "target": 0.0}
    bo_cfg = {**cfg.get("optim", {}).get("bo", {}), "seed": seed, "target": 0.0, "evals": max(hf_cap, 1)}
    bo_cfg["init"] = min(bo_cfg.get("init", 10), bo_cfg["evals"])
    if method in (Method.GA_VANILLA, Method.BO_VANILLA, Method.GA_SUBTOOL, Method.BO_SUBTOOL):
        with_match = method in (Method.GA_VANILLA, Method.BO_VANILLA)
        act, records, plan = _vanilla_parts(ctx)
        bounds = _flat_bounds(plan, with_match)

        def cost(x):
            return _flat_eval(ctx, records, x, obj, with_match)
    else:
        bounds = _wtool_bounds()

        def cost(x):
            return _wtool_eval(ctx, x, obj)
    try:
        if hf_cap > 0:
            if method.value.startswith("GA"):
                ga_minimize(cost, bounds, ga_cfg)
            else:
                bo_minimize(cost, bounds, bo_cfg)
    except _Stop:
        pass
    used = obj.used
    rep = obj.best
    reason = "" if rep is not None else "no passing design within budget"
    return RunRecord(rep is not None, used, time.perf_counter() - start, fom=fom(rep, spec) if rep else None,
                     invalid=used > hf_cap, reason=reason, report=rep.to_dict() if rep else None)


def run_agent(spec: DesignSpec, seed: int, hf_cap: int, timeout_s: float, cfg: dict | None = None,
              policy=None) -> RunRecord:
    budget = {"hf_evals": hf_cap, "wall_seconds": timeout_s}
    res = run_pipeline(spec, seed=seed, budget=budget, cfg=cfg, policy=policy)
    rep = ev.SimReport.from_dict(res.report) if res.success else None
    return RunRecord(res.success, res.hf_evals, res.elapsed, dict(res.tokens),
                     fom=fom(rep, spec) if rep else None, invalid=res.hf_evals > hf_cap,
                     reason="; ".join(res.failure_reasons[:2]), report=res.report)


# -- benchmark ----------------------------------------------------------------


@dataclass
class BenchResult:
    spec_id: str
    seeds: list
    pass_at_1: float
    avg_time_s: float
    avg_prompt_tokens: float
    avg_completion_tokens: float
    hf_evals: list
    fom_history: list | None = None
    successes: list = field(default_factory=list)
    invalid: list = field(default_factory=list)
    method: str = ""

    def to_dict(self, timing: bool = False) -> dict:
        d = asdict(self)
        if not timing:
            d.pop("avg_time_s")
        return d


def run_benchmark(suite, method, seeds, budgets: dict | None = None, cfg: dict | None = None,
                  policy=None) -> list:
    """Every spec of ``suite`` under ``method`` for each seed, with one shared HF cap."""
    method = Method(method)
    budgets = {"hf_evals": 60, "timeout_s": 60.0, **(budgets or {})}
    cap, timeout = int(budgets["hf_evals"]), float(budgets["timeout_s"])
    out = []
    for i, spec in enumerate(suite):
        runs = []
        for seed in seeds:
            if method is Method.AGENT:
                runs.append(run_agent(spec, seed, cap, timeout, cfg, policy))
            else:
                runs.append(run_baseline(method, spec, seed, cap, timeout, cfg))
        ok = [r.success and not r.invalid for r in runs]
        n = max(len(runs), 1)
        out.append(BenchResult(
            spec_id=spec.name or f"spec{i + 1}", seeds=list(seeds), pass_at_1=sum(ok) / n,
            avg_time_s=sum(r.elapsed for r in runs) / n,
            avg_prompt_tokens=sum(r.tokens["prompt"] for r in runs) / n,
            avg_completion_tokens=sum(r.tokens["completion"] for r in runs) / n,
            hf_evals=[r.hf_evals for r in runs], fom_history=[r.fom for r in runs],
            successes=ok, invalid=[r.invalid for r in runs], method=method.value))
    return out


# -- self-evolution -----------------------------------------------------------


@dataclass
class EvolutionTrace:
    mode: str
    gains: list
    hf_per_task: list
    cumulative_hf: list
    fom: list
    success: list

    def to_dict(self) -> dict:
        return asdict(self)


def run_evolution(base_spec: DesignSpec, gain_ladder, mode: Mode, seed: int = 0, store_dir=None,
                  cfg: dict | None = None, budget: dict | None = None) -> EvolutionTrace:
    """Solve the gain ladder in order; retrieve mode reads and grows one memory store."""
    mode = Mode(mode)
    tmp = None
    if store_dir is None:
        tmp = tempfile.TemporaryDirectory()
        store_dir = tmp.name
    store = MemoryStore(store_dir)
    hf, cum, foms, ok = [], [], [], []
    total = 0
    try:
        for t, g in enumerate(gain_ladder):
            spec = base_spec.replace(gain=float(g), name=f"{base_spec.name or 'base'}-g{g:g}")
            res = run_pipeline(spec, mode=mode, seed=seed, cfg=cfg, budget=budget,
                               store=store if mode is Mode.RETRIEVE else None,
                               run_id=f"{mode.value}-{seed}-{t}", created_at=float(t))
            total += res.hf_evals
            hf.append(res.hf_evals)
            cum.append(total)
            ok.append(res.success)
            foms.append(fom(ev.SimReport.from_dict(res.report), spec) if res.success else None)
    finally:
        if tmp is not None:
            tmp.cleanup()
    return EvolutionTrace(mode.value, [float(g) for g in gain_ladder], hf, cum, foms, ok)
