"""Searcher sub-agent: enumerate extreme device configurations for one power
split and synthesize the matched critical stage for each of them."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

from ..spec import DesignSpec
from ..tools import ToolCall, ToolName
from .core import AgentReport, LoopBudget, PolicyTurn, TaskFrame, Terminate, Transcript, react_loop

VARIANTS = ("constrained", "unconstrained")
S11_BAND_MAX_DB = -10.0


def candidate_key(active: dict, variant: str, gain_require, headroom) -> str:
    keys = [[s["class"], s["width"], s["vbias"]] for s in active["stages"]]
    blob = json.dumps([keys, variant, gain_require, headroom], sort_keys=True).encode()
    return hashlib.sha1(blob).hexdigest()[:16]


def estimate_violations(spec: DesignSpec, nf_db: float, ip_db: float, head_min_db: float) -> dict:
    """Violation estimates of a critical-stage candidate before any expensive check.

    The gain axis measures how far the head falls short of an even share
    of the total gain.
    """
    share = spec.gain / spec.stages if math.isfinite(spec.gain) else -math.inf
    return {
        "nf": max(0.0, nf_db - spec.nf_max) if math.isfinite(spec.nf_max) else 0.0,
        "ip1db": max(0.0, spec.ip1db_min - ip_db) if math.isfinite(spec.ip1db_min) else 0.0,
        "gain": max(0.0, share - head_min_db) if math.isfinite(share) else 0.0,
    }


def searcher_plan(instruction: dict, configs: list, queue_snapshot) -> list:
    """(config index, variant) pairs still worth a matching call."""
    seen = set(queue_snapshot or ())
    plan = []
    for i, active in enumerate(configs):
        for variant in VARIANTS:
            greq = instruction.get("gain_require") if variant == "constrained" else None
            key = candidate_key(active, variant, greq, instruction.get("nf_headroom"))
            if key not in seen:
                plan.append((i, variant))
    return plan


def scripted_searcher(frame: TaskFrame) -> PolicyTurn:
    """Deterministic searcher: size once, then match every planned branch."""
    ins = frame.instruction
    sizing = next((t for t in frame.turns if isinstance(t.action, ToolCall)
                   and t.action.tool_name is ToolName.ACTIVE_SIZING and t.observation is not None), None)
    if sizing is None:
        return PolicyTurn(f"Size the active devices for the split {ins['power_ratio_list']}.",
                          ToolCall(ToolName.ACTIVE_SIZING, {"power_ratio_list": list(ins["power_ratio_list"])}, ""))
    if not sizing.observation.ok:
        return PolicyTurn("Sizing failed; nothing to match.",
                          Terminate(frame.finalize(frame.turns, "active sizing failed")))
    configs = sizing.observation.payload["active_params_dict_list"]
    plan = searcher_plan(ins, configs, frame.instruction.get("queue_snapshot"))
    done = sum(1 for t in frame.turns if isinstance(t.action, ToolCall)
               and t.action.tool_name is ToolName.IMPEDANCE_MATCHING)
    if done >= len(plan):
        return PolicyTurn("Every branch has been matched; report the candidates.",
                          Terminate(frame.finalize(frame.turns, "")))
    i, variant = plan[done]
    args = {"active_params": configs[i], "nf_headroom": ins.get("nf_headroom"),
            "s11_band_max": ins.get("s11_band_max", S11_BAND_MAX_DB),
            "seed": int(ins.get("seed", 0)) + 1000 * i + VARIANTS.index(variant)}
    if variant == "constrained":
        args["gain_require"] = ins.get("gain_require")
    return PolicyTurn(f"Match the critical stage of configuration {i} ({variant}).",
                      ToolCall(ToolName.IMPEDANCE_MATCHING, args, ""), memo={"config": i, "variant": variant})


def _collect(frame: TaskFrame, turns) -> list:
    spec, ins = frame.spec, frame.instruction
    out = []
    for t in turns:
        if not (isinstance(t.action, ToolCall) and t.action.tool_name is ToolName.IMPEDANCE_MATCHING):
            continue
        if t.observation is None or not t.observation.ok:
            continue
        args, payload = t.action.args, t.observation.payload
        sim = payload["sim_result_cpstages"]
        variant = "constrained" if args.get("gain_require") is not None else "unconstrained"
        head = sim["head_gain_db"]
        out.append({
            "key": candidate_key(args["active_params"], variant, args.get("gain_require"), args.get("nf_headroom")),
            "origin": "search",
            "variant": variant,
            "power_ratio_list": list(ins["power_ratio_list"]),
            "active_params": args["active_params"],
            "critical": payload["passive_params_cpstages"],
            "head_gain_db": head,
            "gain_require": args.get("gain_require"),
            "stage2_seed": args.get("seed"),
            "headroom": sim["headroom"],
            "estimates": {"nf_db": sim["nf_db"], "ip1db_dbm": sim["ip1db_est_dbm"],
                          "head_min_db": sim["stage_gain_db"], "s11_band_db": sim["s11_band_db"]},
            "violations": estimate_violations(spec, sim["nf_db"], sim["ip1db_est_dbm"], sim["stage_gain_db"]),
            "design": None,
        })
    return out


def _finalizer(frame: TaskFrame):
    def finalize(turns, reason):
        cands = _collect(frame, turns)
        if cands:
            return AgentReport(True, metrics={"candidates": len(cands)}, candidates=cands,
                               failure_reasons=[reason] if reason else [])
        errors = [t.observation.error for t in turns if t.observation is not None and not t.observation.ok]
        errors += [t.error for t in turns if t.error]
        reasons = ([reason] if reason else []) + ["no critical-stage candidate produced"] + errors[:4]
        return AgentReport(False, violated=[("candidates", 1.0)], failure_reasons=reasons)
    return finalize


@dataclass
class SearchOutcome:
    delta: list
    report: AgentReport
    transcript: Transcript


def searcher_run(instruction: dict, queue_snapshot, spec: DesignSpec, policy, tools,
                 max_turns: int = 20, budget: LoopBudget | None = None) -> SearchOutcome:
    """One stateless searcher invocation; everything it needs arrives as arguments."""
    ins = dict(instruction)
    ins["queue_snapshot"] = sorted(queue_snapshot or ())
    frame = TaskFrame("searcher", spec, ins)
    frame.finalize = _finalizer(frame)
    transcript = react_loop(policy, tools, frame, max_turns, budget)
    return SearchOutcome(list(transcript.report.candidates), transcript.report, transcript)
