"""Manager: owns the candidate queue and the budgets, and chooses between
searching for new critical-stage candidates and refining the best one."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from ..spec import DesignSpec
from .core import AgentReport

W_NF, W_LIN, W_LS = 1.0, 1.0, 0.5
MAX_REFINES = 2  # a candidate refined this often without success is dropped
SPLIT_SCHEDULE = ((0.5, 0.5), (0.6, 0.4), (0.4, 0.6))
THIRD_SHARE = 0.3


class BudgetExhausted(RuntimeError):
    pass


class Mode(str, Enum):
    AUTONOMOUS = "AutonomousSearch"
    RETRIEVE = "RetrieveAndRefine"


class ActionKind(str, Enum):
    SEARCH = "SearchCandidates"
    REFINE = "RefineCandidate"


@dataclass(frozen=True)
class ManagerAction:
    kind: ActionKind
    target: str | None = None


def priority(violations: dict) -> float:
    """Higher is better: minus the weighted violation along noise, linearity and gain."""
    return -(W_NF * violations.get("nf", 0.0) + W_LIN * violations.get("ip1db", 0.0)
             + W_LS * violations.get("gain", 0.0))


@dataclass
class QueueEntry:
    key: str
    candidate: dict
    priority: float
    hf_spent: int = 0
    order: int = 0
    refines: int = 0


@dataclass
class ManagerState:
    budget_remaining: dict
    mode: Mode = Mode.AUTONOMOUS
    queue: list = field(default_factory=list)
    history: list = field(default_factory=list)
    search_round: int = 0
    search_rounds: int = len(SPLIT_SCHEDULE)
    evicted: set = field(default_factory=set)
    last_target: str | None = None
    next_order: int = 0

    def push(self, candidate: dict) -> bool:
        """Enqueue unless the key is already queued or was evicted."""
        key = candidate["key"]
        if key in self.evicted or any(e.key == key for e in self.queue):
            return False
        self.queue.append(QueueEntry(key, candidate, priority(candidate.get("violations", {})),
                                     order=self.next_order))
        self.next_order += 1
        return True

    def ranked(self) -> list:
        return sorted(self.queue, key=lambda e: (-e.priority, e.hf_spent, e.order))

    def entry(self, key: str) -> QueueEntry | None:
        return next((e for e in self.queue if e.key == key), None)

    def evict(self, key: str) -> None:
        self.queue = [e for e in self.queue if e.key != key]
        self.evicted.add(key)

    def snapshot(self) -> list:
        return sorted(e.key for e in self.queue)

    def charge(self, **used) -> None:
        for name, amount in used.items():
            self.budget_remaining[name] = self.budget_remaining.get(name, math.inf) - amount

    def exhausted(self) -> bool:
        return any(v <= 0 for v in self.budget_remaining.values())


def report_violations(report: AgentReport) -> dict:
    """Collapse a refiner report onto the three priority axes."""
    v = dict(report.violated)
    return {"nf": v.get("nf", 0.0), "ip1db": v.get("ip1db", 0.0),
            "gain": v.get("gain", 0.0) + v.get("ripple", 0.0)}


def manager_step(state: ManagerState, spec: DesignSpec, last_report: AgentReport | None = None) -> ManagerAction:
    """Update priorities from the last refinement, then pick the next action.

    Raises BudgetExhausted when a budget dimension is used up or when the
    queue is empty and every search round has been spent.
    """
    if last_report is not None and state.last_target is not None:
        entry = state.entry(state.last_target)
        if entry is not None:
            entry.hf_spent += last_report.hf_evals
            entry.refines += 1
            if last_report.infeasible or entry.refines >= MAX_REFINES:
                state.evict(entry.key)
                state.history.append(("evict", entry.key))
            elif not last_report.success:
                entry.priority = priority(report_violations(last_report))
    if state.exhausted():
        raise BudgetExhausted(f"budget used up: {state.budget_remaining}")
    if not state.queue:
        if state.search_round >= state.search_rounds:
            raise BudgetExhausted("search schedule exhausted with an empty queue")
        action = ManagerAction(ActionKind.SEARCH)
    else:
        action = ManagerAction(ActionKind.REFINE, state.ranked()[0].key)
    state.last_target = action.target
    state.history.append((action.kind.value, action.target))
    return action


def search_instruction(state: ManagerState, spec: DesignSpec, seed: int, hints: dict | None = None) -> dict:
    """Searcher arguments for the current search round."""
    a, b = SPLIT_SCHEDULE[state.search_round % len(SPLIT_SCHEDULE)]
    third = THIRD_SHARE
    greq = spec.gain / spec.stages if math.isfinite(spec.gain) else None
    if hints and state.search_round == 0:
        split = hints.get("power_split_hint")
        if split and len(split) == spec.stages:
            third = min(max(float(split[-1]), 0.1), 0.6)
            a = split[0] / (split[0] + split[1])
            b = 1.0 - a
        gains = hints.get("per_stage_gain_hint")
        if gains and greq is not None:
            greq = float(gains[0])
    ratios = [(1.0 - third) * a, (1.0 - third) * b, third]
    return {"power_ratio_list": ratios, "gain_require": greq, "nf_headroom": 0.2,
            "s11_band_max": -10.0, "seed": seed * 100 + state.search_round}
