"""ReAct loop plumbing shared by every sub-agent: reports, turns, frames and
the loop itself."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

from ..spec import DesignSpec
from ..tools import ToolCall, ToolResult, _json_safe


class PolicyError(RuntimeError):
    """The policy could not produce a decision (transport, model, ...)."""


class PolicyFormatError(PolicyError):
    """The policy answered, but not with a well-formed action."""


@dataclass
class AgentReport:
    success: bool
    metrics: dict = field(default_factory=dict)
    violated: list = field(default_factory=list)  # [(constraint, magnitude)]
    failure_reasons: list = field(default_factory=list)
    tokens: dict = field(default_factory=lambda: {"prompt": 0, "completion": 0})
    tool_calls_made: int = 0
    infeasible: bool = False
    hf_evals: int = 0
    candidates: list = field(default_factory=list)  # searcher output
    design: dict | None = None  # refiner output
    sim_report: dict | None = None

    def __post_init__(self):
        self.violated = [(str(name), float(mag)) for name, mag in self.violated]
        if self.success != (not self.violated):
            raise ValueError("success must hold exactly when nothing is violated")

    def to_dict(self) -> dict:
        data = asdict(self)
        data["violated"] = [list(v) for v in self.violated]
        return _json_safe(data)

    @classmethod
    def from_dict(cls, data: dict) -> "AgentReport":
        data = dict(data)
        data["violated"] = [tuple(v) for v in data.get("violated", [])]
        return cls(**data)

    @classmethod
    def failure(cls, reason: str, violated=None, **kw) -> "AgentReport":
        return cls(False, violated=violated or [("completion", 1.0)], failure_reasons=[reason], **kw)


@dataclass
class Terminate:
    report: AgentReport

    def to_dict(self) -> dict:
        return {"terminate": self.report.to_dict()}


@dataclass
class PolicyTurn:
    thought: str
    action: ToolCall | Terminate | None
    observation: ToolResult | None = None
    tokens: dict = field(default_factory=lambda: {"prompt": 0, "completion": 0})
    memo: dict | None = None  # scratch state a policy hands to its next turn
    error: str | None = None  # set on a failed (malformed) turn
    hf_cap: float = math.inf  # expensive-evaluation allowance the call ran under

    def __post_init__(self):
        if isinstance(self.action, Terminate) and not isinstance(self.action.report, AgentReport):
            raise ValueError("a Terminate turn must carry an AgentReport")

    def to_dict(self, canonical: bool = True) -> dict:
        obs = None
        if self.observation is not None:
            obs = self.observation.to_dict()
            if canonical:
                obs["elapsed"] = 0.0
        action = None if self.action is None else self.action.to_dict()
        return _json_safe({"thought": self.thought, "action": action, "observation": obs,
                           "tokens": dict(self.tokens), "memo": self.memo, "error": self.error,
                           "hf_cap": self.hf_cap})

    @classmethod
    def from_dict(cls, data: dict) -> "PolicyTurn":
        act = data.get("action")
        if act is None:
            action = None
        elif "terminate" in act:
            action = Terminate(AgentReport.from_dict(act["terminate"]))
        else:
            action = ToolCall.from_dict(act)
        obs = data.get("observation")
        return cls(data.get("thought", ""), action, None if obs is None else ToolResult.from_dict(obs),
                   dict(data.get("tokens", {"prompt": 0, "completion": 0})), data.get("memo"),
                   data.get("error"), float(data.get("hf_cap", math.inf)))


@dataclass
class TaskFrame:
    """Everything a policy sees when choosing the next action."""

    role: str  # "searcher" | "refiner"
    spec: DesignSpec
    instruction: dict
    turns: list = field(default_factory=list)
    feedback: str | None = None  # format-error note shown on a retry
    finalize: Callable | None = None  # (turns, reason) -> AgentReport

    @property
    def memo(self) -> dict:
        for turn in reversed(self.turns):
            if turn.memo is not None:
                return turn.memo
        return {}

    @property
    def last(self) -> PolicyTurn | None:
        return self.turns[-1] if self.turns else None


@dataclass(frozen=True)
class LoopBudget:
    tool_calls: float = math.inf
    hf_evals: float = math.inf


@dataclass
class Transcript:
    role: str
    turns: list
    report: AgentReport

    @property
    def tokens(self) -> dict:
        return _sum_tokens(self.turns)

    def to_jsonl(self, canonical: bool = True) -> str:
        lines = [json.dumps({"role": self.role, "turn": i, **t.to_dict(canonical)}, sort_keys=True)
                 for i, t in enumerate(self.turns)]
        lines.append(json.dumps({"role": self.role, "report": self.report.to_dict()}, sort_keys=True))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "Transcript":
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not rows or "report" not in rows[-1]:
            raise ValueError("transcript lacks a closing report line")
        turns = [PolicyTurn.from_dict(r) for r in rows[:-1]]
        return cls(rows[-1]["role"], turns, AgentReport.from_dict(rows[-1]["report"]))

    def tool_calls(self) -> list:
        return [t.action for t in self.turns if isinstance(t.action, ToolCall)]


def _sum_tokens(turns) -> dict:
    return {"prompt": sum(t.tokens.get("prompt", 0) for t in turns),
            "completion": sum(t.tokens.get("completion", 0) for t in turns)}


def _lookup_path(obj, path: str):
    for part in [p for p in path.split(".") if p]:
        if isinstance(obj, list):
            obj = obj[int(part)]
        else:
            obj = obj[part]
    return obj


def resolve_refs(value, turns):
    """Replace "@<call_id>[:dotted.path]" strings with data from earlier observations.

    Lets a remote model point at a previous payload instead of copying it.
    """
    if isinstance(value, dict):
        return {k: resolve_refs(v, turns) for k, v in value.items()}
    if isinstance(value, list):
        return [resolve_refs(v, turns) for v in value]
    if isinstance(value, str) and value.startswith("@"):
        call_id, _, path = value[1:].partition(":")
        for t in turns:
            if t.observation is not None and t.observation.call_id == call_id:
                try:
                    return _lookup_path(t.observation.payload, path)
                except (KeyError, IndexError, ValueError, TypeError) as exc:
                    raise PolicyFormatError(f"reference {value!r} does not resolve") from exc
        raise PolicyFormatError(f"reference {value!r} names no earlier call")
    return value


def _generic_finalize(turns, reason):
    return AgentReport.failure(reason)


def _query(policy, frame: TaskFrame):
    """One decision with at most one retry after a malformed answer."""
    spent = {"prompt": 0, "completion": 0}
    error = None
    for attempt in range(2):
        frame.feedback = None if attempt == 0 else f"format error: {error}. Reply with one valid action."
        try:
            turn = policy(frame)
            if not isinstance(turn, PolicyTurn) or not isinstance(turn.action, (ToolCall, Terminate)):
                raise PolicyFormatError("policy returned no tool call or terminate action")
            turn.tokens = {k: turn.tokens.get(k, 0) + spent[k] for k in spent}
            frame.feedback = None
            return turn, None, spent
        except PolicyError as exc:
            error = str(exc)
            used = getattr(exc, "tokens", None) or {}
            spent = {k: spent[k] + used.get(k, 0) for k in spent}
    frame.feedback = None
    return None, error, spent


def react_loop(policy, tools, task_frame: TaskFrame, max_turns: int,
               budget: LoopBudget | None = None) -> Transcript:
    """Alternate policy decisions and tool dispatches until the policy stops.

    ``tools(call, hf_remaining)`` executes one ToolCall.  Call ids and
    timestamps are assigned here (role and turn index) so transcripts are
    reproducible.  Stops on Terminate, ``max_turns`` or an exhausted budget;
    the last two close with the frame's finalizer.
    """
    if max_turns < 1:
        raise ValueError("max_turns must be >= 1")
    budget = budget or LoopBudget()
    finalize = task_frame.finalize or _generic_finalize
    turns = task_frame.turns
    calls, hf = 0, 0
    report = None
    while len(turns) < max_turns:
        turn, error, spent = _query(policy, task_frame)
        if turn is None:
            turns.append(PolicyTurn("", None, None, spent, None, error))
            continue
        if isinstance(turn.action, Terminate):
            turns.append(turn)
            report = turn.action.report
            break
        if calls >= budget.tool_calls or hf >= budget.hf_evals:
            report = finalize(turns, "budget exhausted")
            break
        n = len(turns)
        try:
            args = resolve_refs(turn.action.args, turns)
        except PolicyFormatError as exc:
            turns.append(PolicyTurn(turn.thought, None, None, turn.tokens, turn.memo, str(exc)))
            continue
        call = ToolCall(turn.action.tool_name, args, f"{task_frame.role}-{n}", float(n))
        cap = budget.hf_evals - hf
        obs = tools(call, cap)
        calls += 1
        hf += obs.hf_evals_used
        turns.append(replace(turn, action=call, observation=obs, hf_cap=cap))
    if report is None:
        report = finalize(turns, "max turns reached")
    report.tokens = _sum_tokens(turns)
    report.tool_calls_made = calls
    report.hf_evals = hf
    return Transcript(task_frame.role, turns, report)


def replay(transcript: Transcript, tools) -> list:
    """Re-dispatch every recorded tool call; returns the fresh observations."""
    return [tools(t.action, t.hf_cap) for t in transcript.turns if isinstance(t.action, ToolCall)]
