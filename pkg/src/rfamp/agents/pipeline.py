"""End-to-end design run: manager loop over searcher and refiner calls, with
optional retrieval from (and persistence to) the design memory."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .. import evaluator as ev
from ..memory import EBRecord, KBRecord, MemoryStore, NoExperience
from ..spec import DesignSpec
from ..tools import ToolBox, ToolContext
from .core import LoopBudget
from .manager import ActionKind, BudgetExhausted, ManagerState, Mode, manager_step, search_instruction
from .policy import ScriptedPolicy
from .refiner import refiner_run
from .searcher import searcher_run

DEFAULT_BUDGET = {"hf_evals": 60, "tool_calls": 200, "wall_seconds": 60.0}


@dataclass
class PipelineResult:
    success: bool
    design: dict | None
    report: dict | None
    hf_evals: int
    tool_calls: int
    tokens: dict
    elapsed: float
    history: list = field(default_factory=list)
    transcripts: list = field(default_factory=list)
    failure_reasons: list = field(default_factory=list)

    def to_dict(self) -> dict:
        """Deterministic summary (wall-clock time left out)."""
        return {"success": self.success, "design": self.design, "report": self.report,
                "hf_evals": self.hf_evals, "tool_calls": self.tool_calls, "tokens": dict(self.tokens),
                "history": [list(h) for h in self.history], "failure_reasons": list(self.failure_reasons)}


def kb_candidate(record: KBRecord, spec: DesignSpec) -> dict | None:
    """Queue entry for a retrieved design; None when it lacks the stored context."""
    d = record.candidate.to_dict()
    meta = d.get("meta", {})
    if not all(k in meta for k in ("active_params", "critical", "head_gain_db")):
        return None
    d["meta"] = {**meta, "report": record.report.to_dict()}
    r = record.report
    band = spec.band_mask(np.asarray(r.freq_grid)) if len(r.freq_grid) == len(spec.freq_grid()) else r.in_band
    viol = ev.violations_for(spec, np.asarray(r.gain_db)[band], np.asarray(r.s11_db)[band], r.nf_db,
                             r.ip1db_dbm, r.power_ma)
    return {
        "key": f"kb-{record.candidate_hash}",
        "origin": "kb",
        "variant": "retrieved",
        "power_ratio_list": meta.get("power_ratio_list"),
        "active_params": meta["active_params"],
        "critical": meta["critical"],
        "head_gain_db": meta["head_gain_db"],
        "gain_require": meta.get("gain_require"),
        "stage2_seed": meta.get("stage2_seed"),
        "headroom": meta.get("headroom", 0.2),
        "violations": {"nf": viol["nf"], "ip1db": viol["ip1db"], "gain": viol["gain"] + viol["ripple"]},
        "design": d,
    }


def run_pipeline(spec: DesignSpec, *, mode: Mode = Mode.AUTONOMOUS, policy=None, seed: int = 0,
                 budget: dict | None = None, cfg: dict | None = None, tables=None,
                 store: MemoryStore | None = None, run_id: str = "", created_at: float = 0.0,
                 keep_transcripts: bool = False) -> PipelineResult:
    """Run the manager loop until a design passes or a budget runs out."""
    cfg = cfg or {}
    pcfg = cfg.get("pipeline", {})
    budget = {**DEFAULT_BUDGET, **{k: pcfg[k] for k in DEFAULT_BUDGET if k in pcfg}, **(budget or {})}
    policy = policy or ScriptedPolicy(spec)
    ctx_kw = {"spec": spec, "seed": seed, "mf_rounds": int(pcfg.get("mf_rounds", 5))}
    if tables is not None:
        ctx_kw["tables"] = tables
    optim = cfg.get("optim", {})
    if "pso" in optim:
        ctx_kw["pso"] = dict(optim["pso"])
    if "sa" in optim:
        ctx_kw["sa"] = dict(optim["sa"])
    tools = ToolBox(ToolContext(**ctx_kw))
    refine_hf = pcfg.get("refine_hf", 24)
    refine_calls = pcfg.get("refine_tool_calls", 14)
    max_turns = int(pcfg.get("max_turns", 40))

    state = ManagerState({"hf_evals": budget["hf_evals"], "tool_calls": budget["tool_calls"],
                          "wall_seconds": budget["wall_seconds"]}, mode)
    hints = None
    if mode is Mode.RETRIEVE and store is not None:
        k = int(pcfg.get("kb_top_k", 3))
        for rec in store.kb_query(spec, k):
            cand = kb_candidate(rec, spec)
            if cand is not None:
                state.push(cand)
        try:
            hints = store.eb_hints(spec, k)
        except NoExperience:
            hints = None

    start = time.perf_counter()
    hf0 = ev.HF_COUNTER.value
    tokens = {"prompt": 0, "completion": 0}
    transcripts, reasons = [], []
    last = None
    success, design, report = False, None, None
    calls = 0
    last_eval = None
    while True:
        try:
            action = manager_step(state, spec, last)
        except BudgetExhausted as exc:
            reasons.append(str(exc))
            break
        remaining = state.budget_remaining
        t0 = time.perf_counter()
        if action.kind is ActionKind.SEARCH:
            ins = search_instruction(state, spec, seed, hints)
            out = searcher_run(ins, state.snapshot(), spec, policy, tools, max_turns,
                               LoopBudget(remaining["tool_calls"], remaining["hf_evals"]))
            state.search_round += 1
            for cand in out.delta:
                state.push(cand)
            rep, tr = out.report, out.transcript
            last = None
        else:
            entry = state.entry(action.target)
            lb = LoopBudget(min(refine_calls, remaining["tool_calls"]), min(refine_hf, remaining["hf_evals"]))
            out = refiner_run(entry.candidate, spec, lb, policy, tools, max_turns,
                              seed=seed * 1000 + entry.order * 10 + entry.refines)
            rep, tr = out.report, out.transcript
            last = rep
            if rep.sim_report is not None:
                last_eval = rep
        state.charge(hf_evals=rep.hf_evals, tool_calls=rep.tool_calls_made,
                     wall_seconds=time.perf_counter() - t0)
        calls += rep.tool_calls_made
        tokens = {k: tokens[k] + rep.tokens.get(k, 0) for k in tokens}
        if keep_transcripts:
            transcripts.append(tr)
        if action.kind is ActionKind.REFINE and rep.success:
            success, design, report = True, rep.design, rep.sim_report
            break
        if action.kind is ActionKind.REFINE:
            reasons.extend(rep.failure_reasons[:1])
    if not success and last_eval is not None:
        report = last_eval.sim_report
    result = PipelineResult(success, design, report, ev.HF_COUNTER.value - hf0, calls, tokens,
                            time.perf_counter() - start, list(state.history), transcripts,
                            reasons if not success else [])
    if store is not None:
        _persist(store, spec, result, run_id, created_at)
    return result


def _persist(store: MemoryStore, spec: DesignSpec, result: PipelineResult, run_id: str, created_at: float):
    if result.report is None:
        return
    rep = ev.SimReport.from_dict(result.report)
    if rep.error or len(rep.per_stage_gain_db) != spec.stages:
        return
    split = []
    if result.success and result.design is not None:
        cand = ev.CandidateDesign.from_dict(result.design)
        cand.meta.pop("report", None)
        store.kb_put(KBRecord(spec, cand, rep, created_at, run_id))
        split = list(cand.meta.get("power_ratio_list") or [])
    template = "success" if result.success else "partial"
    store.eb_put(EBRecord.from_report(spec, rep, template, split, run_id))


def closed_loop_check(result: PipelineResult, spec: DesignSpec, tables=None) -> ev.SimReport:
    """Re-simulate the returned design (counts one expensive evaluation)."""
    if result.design is None:
        raise ValueError("no design to check")
    return ev.fullchain_report(ev.CandidateDesign.from_dict(result.design), spec, tables)


__all__ = ["PipelineResult", "run_pipeline", "closed_loop_check", "kb_candidate"]
