"""Decision policies: the deterministic scripted one and a remote chat endpoint."""

from __future__ import annotations

import json
import os
import urllib.error
import urllib.request

from ..tools import SchemaError, ToolCall, ToolName, _json_safe
from .core import PolicyError, PolicyFormatError, PolicyTurn, TaskFrame, Terminate
from .refiner import scripted_refiner
from .searcher import scripted_searcher


class ScriptedPolicy:
    """Decision-tree policy; no model in the loop, so token counts stay zero."""

    def __init__(self, spec=None):
        self.spec = spec

    def __call__(self, frame: TaskFrame) -> PolicyTurn:
        if frame.role == "searcher":
            return scripted_searcher(frame)
        if frame.role == "refiner":
            return scripted_refiner(frame)
        raise PolicyError(f"no scripted behaviour for role {frame.role!r}")


def scripted(spec=None) -> ScriptedPolicy:
    return ScriptedPolicy(spec)


# -- remote -------------------------------------------------------------------

TOOL_DOCS = {
    ToolName.ACTIVE_SIZING: (
        "Split the supply current between the stages and return up to four device "
        "configurations at the extremes of the device grid.",
        {"power_ratio_list": {"type": "array", "items": {"type": "number"},
                              "description": "current share per stage, summing to 1"}},
        ["power_ratio_list"],
    ),
    ToolName.IMPEDANCE_MATCHING: (
        "Size the first coupled resonator, the source inductor and the input L-match "
        "for one device configuration, keeping noise below the limit minus a headroom.",
        {"active_params": {"type": "object", "description": "one configuration from ActiveSizing"},
         "nf_headroom": {"type": "number"}, "gain_require": {"type": "number"},
         "seed": {"type": "integer"}, "s11_band_max": {"type": "number"}},
        ["active_params"],
    ),
    ToolName.BAND_PLANNING: (
        "Place the remaining resonators so the whole chain covers the band with the "
        "target gain; checks the result with the expensive simulator.",
        {"active_params": {"type": "object"}, "gain_list": {"type": "array", "items": {"type": "number"}},
         "critical": {"type": "object", "description": "passives of the matched first stage"},
         "gain_req_list": {"type": "array", "items": {"type": "number"}},
         "seed": {"type": "integer"}, "x0": {"type": "array"}, "residual0": {"type": "array"}},
        ["active_params", "gain_list", "critical"],
    ),
    ToolName.FULLCHAIN_EVAL: (
        "Simulate a complete design and return its performance report (expensive).",
        {"wholechain_active": {"type": "object"}, "wholechain_passive": {"type": "object"}},
        ["wholechain_active", "wholechain_passive"],
    ),
}

FINISH = "finish"


def tool_schemas() -> list:
    out = []
    for name, (doc, props, required) in TOOL_DOCS.items():
        out.append({"type": "function", "function": {
            "name": name.value, "description": doc,
            "parameters": {"type": "object", "properties": props, "required": required}}})
    out.append({"type": "function", "function": {
        "name": FINISH, "description": "Stop and hand back the result.",
        "parameters": {"type": "object", "properties": {"summary": {"type": "string"}}}}})
    return out


SYSTEM_PROMPT = {
    "searcher": ("You explore device sizings for a three-stage amplifier. Call ActiveSizing once for "
                 "the given split, then ImpedanceMatching twice per configuration: once with the "
                 "instruction's gain_require and once without. Call finish when done."),
    "refiner": ("You complete one amplifier candidate. Call BandPlanning, read the verdict and, on a "
                "failure, adjust headroom, gain floors or current split before trying again. Call "
                "finish when every target is met or nothing more can help."),
}

MAX_OBS_CHARS = 4000


def _brief(payload) -> str:
    text = json.dumps(_json_safe(payload), sort_keys=True)
    return text if len(text) <= MAX_OBS_CHARS else text[:MAX_OBS_CHARS] + "...(truncated)"


def render_messages(frame: TaskFrame) -> list:
    """Chat transcript for the frame; large payloads are cut, references use @call_id."""
    task = {"role": frame.role, "spec": frame.spec.to_dict(),
            "instruction": {k: v for k, v in frame.instruction.items() if k != "candidate"}}
    if "candidate" in frame.instruction:
        task["candidate"] = "available as @candidate"
    msgs = [{"role": "system", "content": SYSTEM_PROMPT.get(frame.role, "")},
            {"role": "user", "content": json.dumps(_json_safe(task), sort_keys=True)}]
    for t in frame.turns:
        if isinstance(t.action, ToolCall):
            msgs.append({"role": "assistant", "content": t.thought,
                         "tool_calls": [{"id": t.action.call_id, "type": "function",
                                         "function": {"name": t.action.tool_name.value,
                                                      "arguments": "(omitted)"}}]})
            obs = t.observation
            body = {"ok": obs.ok, "error": obs.error, "hf_evals_used": obs.hf_evals_used,
                    "payload": _brief(obs.payload)}
            msgs.append({"role": "tool", "tool_call_id": t.action.call_id, "content": json.dumps(body)})
        elif t.error:
            msgs.append({"role": "user", "content": f"previous reply rejected: {t.error}"})
    if frame.feedback:
        msgs.append({"role": "user", "content": frame.feedback})
    return msgs


def parse_reply(reply: dict) -> tuple:
    """(thought, tool name or FINISH, arguments dict, tokens) from a chat reply.

    Accepts the common chat-completion shape (choices/message/tool_calls) or
    a flat {"tool_call": {"name", "arguments"}} / {"content": ...} object.
    """
    if not isinstance(reply, dict):
        raise PolicyFormatError("reply is not a JSON object")
    usage = reply.get("usage") or {}
    tokens = {"prompt": int(usage.get("prompt_tokens", 0)), "completion": int(usage.get("completion_tokens", 0))}
    msg = reply
    if "choices" in reply:
        try:
            msg = reply["choices"][0]["message"]
        except (KeyError, IndexError, TypeError) as exc:
            raise PolicyFormatError("reply has no message") from exc
    thought = msg.get("content") or ""
    call = None
    if msg.get("tool_calls"):
        call = msg["tool_calls"][0].get("function", msg["tool_calls"][0])
    elif msg.get("tool_call"):
        call = msg["tool_call"]
    if call is None:
        if isinstance(thought, str) and thought.strip():
            return thought, FINISH, {}, tokens
        raise PolicyFormatError("reply holds neither a tool call nor text")
    name = call.get("name")
    args = call.get("arguments", {})
    if isinstance(args, str):
        try:
            args = json.loads(args) if args.strip() else {}
        except json.JSONDecodeError as exc:
            raise PolicyFormatError(f"arguments are not JSON: {exc}") from exc
    if not isinstance(args, dict):
        raise PolicyFormatError("arguments must be an object")
    if name != FINISH:
        try:
            ToolName(name)
        except ValueError as exc:
            raise PolicyFormatError(f"unknown tool {name!r}") from exc
    return thought, name, args, tokens


def _with_tokens(exc: PolicyError, tokens: dict) -> PolicyError:
    exc.tokens = tokens
    return exc


class RemotePolicy:
    """Chat-completion endpoint as a policy; one HTTP request per decision."""

    def __init__(self, url: str | None = None, key: str | None = None, model: str = "default",
                 timeout: float = 60.0):
        self.url = url or os.environ.get("RFAMP_LLM_URL")
        self.key = key if key is not None else os.environ.get("RFAMP_LLM_KEY")
        if not self.url:
            raise PolicyError("remote policy needs RFAMP_LLM_URL")
        if self.key is None:
            raise PolicyError("remote policy needs RFAMP_LLM_KEY")
        self.model = model
        self.timeout = timeout

    def request(self, body: dict) -> dict:
        data = json.dumps(body).encode()
        req = urllib.request.Request(self.url, data=data, method="POST", headers={
            "Content-Type": "application/json", "Authorization": f"Bearer {self.key}"})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return json.loads(resp.read().decode())
        except (urllib.error.URLError, OSError) as exc:
            raise PolicyError(f"transport failure: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise PolicyFormatError(f"reply is not JSON: {exc}") from exc

    def __call__(self, frame: TaskFrame) -> PolicyTurn:
        body = {"model": self.model, "messages": render_messages(frame), "tools": tool_schemas()}
        reply = self.request(body)
        try:
            thought, name, args, tokens = parse_reply(reply)
        except PolicyFormatError as exc:
            usage = (reply.get("usage") or {}) if isinstance(reply, dict) else {}
            raise _with_tokens(exc, {"prompt": int(usage.get("prompt_tokens", 0)),
                                     "completion": int(usage.get("completion_tokens", 0))})
        if name == FINISH:
            reason = args.get("summary", thought) if isinstance(args, dict) else thought
            report = frame.finalize(frame.turns, "" if reason is None else str(reason)[:200])
            return PolicyTurn(thought, Terminate(report), tokens=tokens)
        args = _expand_candidate(args, frame)
        try:
            call = ToolCall.from_dict({"tool_name": name, "args": args, "call_id": ""})
        except SchemaError as exc:
            raise _with_tokens(PolicyFormatError(str(exc)), tokens)
        return PolicyTurn(thought, call, tokens=tokens)


def _expand_candidate(args: dict, frame: TaskFrame) -> dict:
    """Resolve "@candidate[:path]" against the refiner's candidate."""
    cand = frame.instruction.get("candidate")
    out = {}
    for k, v in args.items():
        if isinstance(v, str) and v.startswith("@candidate"):
            if cand is None:
                raise PolicyFormatError("no candidate in this task")
            obj = cand
            for part in [p for p in v[len("@candidate"):].lstrip(":").split(".") if p]:
                try:
                    obj = obj[int(part)] if isinstance(obj, list) else obj[part]
                except (KeyError, IndexError, ValueError, TypeError) as exc:
                    raise PolicyFormatError(f"reference {v!r} does not resolve") from exc
            out[k] = obj
        else:
            out[k] = v
    return out
