"""Manager / searcher / refiner orchestration over the tool middleware."""

from .core import (AgentReport, LoopBudget, PolicyError, PolicyFormatError, PolicyTurn, TaskFrame, Terminate,
                   Transcript, react_loop, replay)
from .manager import (ActionKind, BudgetExhausted, ManagerAction, ManagerState, Mode, QueueEntry, manager_step,
                      priority, search_instruction)
from .pipeline import PipelineResult, closed_loop_check, kb_candidate, run_pipeline
from .policy import RemotePolicy, ScriptedPolicy, parse_reply, render_messages, scripted, tool_schemas
from .refiner import RefineOutcome, refiner_run, scripted_refiner
from .searcher import SearchOutcome, candidate_key, scripted_searcher, searcher_run

__all__ = [
    "AgentReport", "LoopBudget", "PolicyError", "PolicyFormatError", "PolicyTurn", "TaskFrame", "Terminate",
    "Transcript", "react_loop", "replay", "ActionKind", "BudgetExhausted", "ManagerAction", "ManagerState",
    "Mode", "QueueEntry", "manager_step", "priority", "search_instruction", "PipelineResult",
    "closed_loop_check", "kb_candidate", "run_pipeline", "RemotePolicy", "ScriptedPolicy", "parse_reply",
    "render_messages", "scripted", "tool_schemas", "RefineOutcome", "refiner_run", "scripted_refiner",
    "SearchOutcome", "candidate_key", "scripted_searcher", "searcher_run",
]
