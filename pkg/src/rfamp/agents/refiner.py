"""Refiner sub-agent: finish a critical-stage candidate by planning the
remaining resonators, reading the expensive verdict and backtracking."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .. import evaluator as ev
from ..mcr import MCRPhysical
from ..spec import DesignSpec
from ..tools import (LAND_OFFSET_DB, ActionKind, AttemptState, GAIN_SHIFT_DB, ToolCall, ToolName, backtrack_decide,
                     candidate_from_parts, records_from_active)
from .core import AgentReport, LoopBudget, PolicyTurn, TaskFrame, Terminate, Transcript, react_loop
from .searcher import S11_BAND_MAX_DB

THIRD_SHARE_STEP = 0.1
THIRD_SHARE_MAX = 0.6
REUSE_SLACK_DB = 1.0
REMATCH_TOL_DB = 0.5  # retrieved heads within this of the new gain share are reused as is


def judge_stored(report: dict | None, spec: DesignSpec) -> bool:
    """Whether a stored report's curves already satisfy ``spec`` (no new evaluation).

    A design whose in-band minimum gain sits more than REUSE_SLACK_DB below the
    planner's preferred landing is not reused as is; re-planning it is cheap
    and buys gain.
    """
    if not report or report.get("error"):
        return False
    r = ev.SimReport.from_dict(report)
    if list(r.freq_grid) != [float(f) for f in spec.freq_grid()]:
        return False
    band = spec.band_mask(np.asarray(r.freq_grid))
    viol = ev.violations_for(spec, np.asarray(r.gain_db)[band], np.asarray(r.s11_db)[band],
                             r.nf_db, r.ip1db_dbm, r.power_ma)
    floor = spec.gain + LAND_OFFSET_DB - REUSE_SLACK_DB
    if math.isfinite(spec.gain) and float(np.min(np.asarray(r.gain_db)[band])) < floor:
        return False
    return all(v == 0.0 or ev._relaxed(spec, k) for k, v in viol.items())


def report_metrics(r: ev.SimReport) -> dict:
    band = r.in_band if r.band_ghz else np.ones(len(r.gain_db), bool)
    g = np.asarray(r.gain_db)[band]
    return {
        "gain_min_db": float(g.min()) if g.size else -math.inf,
        "ripple_db": float(g.max() - g.min()) if g.size else math.inf,
        "nf_db": r.nf_db,
        "ip1db_dbm": r.ip1db_dbm,
        "s11_max_db": float(np.max(np.asarray(r.s11_db)[band])) if g.size else 0.0,
        "power_ma": r.power_ma,
        "per_stage_gain_db": list(r.per_stage_gain_db),
    }


def violated_list(r: ev.SimReport) -> list:
    return [(k, float(r.violations[k])) for k in ev.CHECKS if r.violations.get(k, 0.0) > 0]


def _last_report(turns):
    for t in reversed(turns):
        obs = t.observation
        if obs is None or obs.payload is None:
            continue
        p = obs.payload
        if "sim_results_dict" in p:
            return ev.SimReport.from_dict(p["sim_results_dict"])
        if "cal_gain_dict" in p and p["cal_gain_dict"].get("hf_report"):
            return ev.SimReport.from_dict(p["cal_gain_dict"]["hf_report"])
    return None


def design_from_turn(turn, extra_meta=None) -> ev.CandidateDesign | None:
    """The complete design a BandPlanning or FullchainEval turn evaluated."""
    call, obs = turn.action, turn.observation
    if not isinstance(call, ToolCall) or obs is None or obs.payload is None:
        return None
    a = call.args
    if call.tool_name is ToolName.FULLCHAIN_EVAL:
        return ev.CandidateDesign.from_dict({"x1": a["wholechain_active"]["x1"], **a["wholechain_passive"],
                                             "meta": dict(extra_meta or {})})
    if call.tool_name is not ToolName.BAND_PLANNING or "passive_params_dict" not in obs.payload:
        return None
    records = records_from_active(a["active_params"])
    pp = obs.payload["passive_params_dict"]
    mcrs = [MCRPhysical(**pp[f"x2_{i}"]) for i in range(2, len(records) + 1)]
    hist = obs.payload["cal_gain_dict"].get("residual_history")
    meta = {"abstract": pp["abstract"], "residual": hist[-1] if hist else None,
            "head_gain_db": a["gain_list"], "active_params": a["active_params"], "critical": a["critical"],
            **(extra_meta or {})}
    return candidate_from_parts(records, a["critical"], mcrs, meta)


def _finalizer(frame: TaskFrame):
    def finalize(turns, reason, infeasible=False, extra_meta=None):
        r = _last_report(turns)
        reasons = [reason] if reason else []
        if r is None:
            return AgentReport.failure(reason or "no expensive evaluation completed", infeasible=infeasible)
        if r.passed:
            turn = next(t for t in reversed(turns) if t.observation is not None and t.observation.payload)
            design = design_from_turn(turn, extra_meta)
            if design is not None:
                d = design.to_dict()
                d["meta"]["report"] = r.to_dict()
                return AgentReport(True, metrics=report_metrics(r), design=d, sim_report=r.to_dict())
        violated = violated_list(r) or [("completion", 1.0)]
        if r.error:
            reasons.append(r.error)
        return AgentReport(False, metrics=report_metrics(r), violated=violated, failure_reasons=reasons,
                           infeasible=infeasible, sim_report=r.to_dict())
    return finalize


def _initial_memo(candidate: dict) -> dict:
    return {
        "active": candidate["active_params"],
        "critical": candidate["critical"],
        "head": candidate["head_gain_db"],
        "headroom": candidate.get("headroom", 0.2),
        "gain_require": candidate.get("gain_require"),
        "ratios": candidate.get("power_ratio_list"),
        "stage2_seed": candidate.get("stage2_seed"),
        "attempt": asdict(AttemptState(headroom=candidate.get("headroom", 0.2))),
        "x0": (candidate.get("design") or {}).get("meta", {}).get("abstract"),
        "residual0": (candidate.get("design") or {}).get("meta", {}).get("residual"),
        "pending": None,
    }


def _plan_call(memo: dict, seed: int, gain_req=None) -> ToolCall:
    args = {"active_params": memo["active"], "gain_list": memo["head"], "critical": memo["critical"],
            "seed": seed}
    if gain_req is not None:
        args["gain_req_list"] = list(gain_req)
    if memo.get("x0") is not None:
        args["x0"] = memo["x0"]
        if memo.get("residual0") is not None:
            args["residual0"] = memo["residual0"]
    return ToolCall(ToolName.BAND_PLANNING, args, "")


def _stage2_call(memo: dict, seed: int) -> ToolCall:
    args = {"active_params": memo["active"], "nf_headroom": memo["headroom"], "seed": seed,
            "s11_band_max": S11_BAND_MAX_DB}
    if memo.get("gain_require") is not None:
        args["gain_require"] = memo["gain_require"]
    return ToolCall(ToolName.IMPEDANCE_MATCHING, args, "")


def scripted_refiner(frame: TaskFrame) -> PolicyTurn:
    """Deterministic refiner following the staged backtracking ladder."""
    spec, ins = frame.spec, frame.instruction
    seed = int(ins.get("seed", 0)) + 31 * len(frame.turns)
    cand = ins["candidate"]
    if not frame.turns:
        memo = _initial_memo(cand)
        stored = (cand.get("design") or {}).get("meta", {}).get("report")
        if cand.get("design") is not None and judge_stored(stored, spec):
            memo["pending"] = "confirm"
            d = cand["design"]
            args = {"wholechain_active": {"x1": d["x1"]}, "wholechain_passive": {"x2": d["x2"], "x3": d["x3"]}}
            return PolicyTurn("The stored report already meets the targets; confirm it with one evaluation.",
                              ToolCall(ToolName.FULLCHAIN_EVAL, args, ""), memo=memo)
        share = spec.gain / spec.stages if math.isfinite(spec.gain) else None
        if (cand.get("origin") == "kb" and share is not None and memo["gain_require"] is not None
                and abs(memo["gain_require"] - share) > REMATCH_TOL_DB):
            # the stored head was matched for another gain share; re-match it (no expensive call)
            memo.update(gain_require=share, pending="rematch")
            s2 = seed if memo["stage2_seed"] is None else memo["stage2_seed"]
            return PolicyTurn(f"The retrieved head was sized for a different gain share; re-match it for "
                              f"{share:.1f} dB.", _stage2_call(memo, s2), memo=memo)
        memo["pending"] = "plan"
        return PolicyTurn("Plan the remaining resonators around the matched head.", _plan_call(memo, seed), memo=memo)

    memo = dict(frame.memo)
    last = frame.last
    obs = last.observation
    finalize = frame.finalize
    pending = memo.get("pending")

    if pending == "sizing":
        if not obs.ok:
            return PolicyTurn("Re-sizing failed.", Terminate(finalize(frame.turns, "re-sizing failed", True)))
        choice = memo.get("choice")
        options = obs.payload["active_params_dict_list"]
        pick = next((a for a in options if a.get("choice") == choice), options[0])
        memo.update(active=pick, ratios=obs.payload["power_ratio_list"], pending="stage2")
        return PolicyTurn("Re-match the critical stage on the new sizing.", _stage2_call(memo, seed), memo=memo)

    if pending in ("stage2", "rematch"):
        if not obs.ok:
            return PolicyTurn("The critical stage is no longer feasible.",
                              Terminate(finalize(frame.turns, "critical stage infeasible after backtracking", True)))
        passive, sim = obs.payload["passive_params_cpstages"], obs.payload["sim_result_cpstages"]
        keep = memo["residual0"] if pending == "rematch" else None  # warm start stays valid for a re-match
        memo.update(critical=passive, head=sim["head_gain_db"], pending="plan", residual0=keep)
        return PolicyTurn("Re-plan the remaining resonators for the new head.", _plan_call(memo, seed), memo=memo)

    # pending in ("plan", "confirm"): read the expensive verdict
    report = None
    if obs is not None and obs.payload is not None:
        if pending == "confirm":
            report = ev.SimReport.from_dict(obs.payload["sim_results_dict"])
        elif obs.payload.get("cal_gain_dict", {}).get("hf_report"):
            report = ev.SimReport.from_dict(obs.payload["cal_gain_dict"]["hf_report"])
    if report is None:
        why = obs.error if obs is not None and obs.error else "no expensive verdict"
        budget_out = obs is not None and (obs.error or "").startswith("BudgetExhausted")
        return PolicyTurn("No usable verdict; stop.",
                          Terminate(finalize(frame.turns, why, not budget_out)))
    attempt = AttemptState(**{**memo["attempt"], "stage_gains": tuple(report.per_stage_gain_db)})
    action = backtrack_decide(report, spec, attempt)
    if pending == "plan":
        memo["x0"] = obs.payload["passive_params_dict"]["abstract"]
        hist = obs.payload["cal_gain_dict"].get("residual_history")
        memo["residual0"] = hist[-1] if hist else None
    base = {**memo["attempt"], "stage_gains": tuple(report.per_stage_gain_db), "attempts": attempt.attempts + 1}

    if action.kind is ActionKind.ACCEPT:
        extra = {"power_ratio_list": memo["ratios"], "gain_require": memo["gain_require"],
                 "headroom": memo["headroom"], "stage2_seed": memo.get("stage2_seed")}
        if pending == "confirm":
            extra = {**cand["design"].get("meta", {}), **extra}
            extra.pop("report", None)
        return PolicyTurn("All targets met; accept.", Terminate(finalize(frame.turns, "", extra_meta=extra)))
    if action.kind is ActionKind.ABORT:
        return PolicyTurn("Attempt limit reached.", Terminate(finalize(frame.turns, "attempt limit reached", True)))
    if action.kind is ActionKind.ESCALATE_STAGE1:
        return PolicyTurn("The ladder is exhausted; the critical stage has to change.",
                          Terminate(finalize(frame.turns, "infeasible: escalate to device sizing", True)))
    if action.kind is ActionKind.RERUN_2_TO_4:
        memo["headroom"] = action.adjusted_headroom
        memo["attempt"] = {**base, "headroom": action.adjusted_headroom, "linearity_attempts": 0}
        memo["pending"] = "stage2"
        return PolicyTurn(f"Noise is {report.nf_db - spec.nf_max:.2f} dB over; widen the headroom to "
                          f"{action.adjusted_headroom:.2f} dB and re-match.", _stage2_call(memo, seed), memo=memo)
    memo["attempt"] = {**base, "linearity_attempts": attempt.linearity_attempts + 1}
    if action.kind is ActionKind.REPLAN_3_TIGHTER:
        memo["pending"] = "plan"
        return PolicyTurn(f"Shift {GAIN_SHIFT_DB:g} dB of gain onto the last stage and re-plan.",
                          _plan_call(memo, seed, action.gain_constraints), memo=memo)
    # global gain re-allocation
    ratios = memo.get("ratios")
    if report.violations.get("ip1db", 0.0) > 0 and ratios and ratios[-1] + THIRD_SHARE_STEP <= THIRD_SHARE_MAX:
        third = ratios[-1] + THIRD_SHARE_STEP
        scale = (1.0 - third) / (1.0 - ratios[-1])
        new = [r * scale for r in ratios[:-1]] + [third]
        memo.update(choice=memo["active"].get("choice"), pending="sizing")
        memo["residual0"] = None
        return PolicyTurn(f"Linearity short by {report.violations['ip1db']:.2f} dB; give the last stage "
                          f"{third:.0%} of the current.", ToolCall(ToolName.ACTIVE_SIZING,
                                                                  {"power_ratio_list": new}, ""), memo=memo)
    head_min = float(np.min(np.asarray(memo["head"])[spec.band_mask()]))
    gmin = report_metrics(report)["gain_min_db"]
    step = GAIN_SHIFT_DB if gmin < spec.gain else -GAIN_SHIFT_DB
    if report.violations.get("ip1db", 0.0) > 0:
        step = -GAIN_SHIFT_DB
    memo["gain_require"] = head_min + step
    memo["pending"] = "stage2"
    return PolicyTurn(f"Re-balance the global gain: ask the head for {memo['gain_require']:.1f} dB.",
                      _stage2_call(memo, seed), memo=memo)


@dataclass
class RefineOutcome:
    design: ev.CandidateDesign | None
    report: AgentReport
    transcript: Transcript


def refiner_run(candidate: dict, spec: DesignSpec, budget: LoopBudget, policy, tools,
                max_turns: int = 16, seed: int = 0) -> RefineOutcome:
    """One stateless refiner invocation on a critical-stage candidate."""
    frame = TaskFrame("refiner", spec, {"candidate": candidate, "seed": seed,
                                        "budget": {"tool_calls": budget.tool_calls, "hf_evals": budget.hf_evals}})
    frame.finalize = _finalizer(frame)
    transcript = react_loop(policy, tools, frame, max_turns, budget)
    rep = transcript.report
    design = ev.CandidateDesign.from_dict(rep.design) if rep.success and rep.design else None
    return RefineOutcome(design, rep, transcript)
