"""Run configuration: built-in defaults overlaid with an ``rfamp.toml`` file."""

from __future__ import annotations

import copy
import os
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

DEFAULTS = {
    "optim": {
        "pso": {"particles": 16, "iters": 40},
        "sa": {"steps": 1500, "t0": 300.0, "cooling": 0.996, "step_scale": 0.15},
        "ga": {"pop": 24, "generations": 100},
        "bo": {"init": 10, "candidates": 256},
    },
    "pipeline": {
        "hf_evals": 60,
        "tool_calls": 200,
        "wall_seconds": 60.0,
        "refine_hf": 24,
        "refine_tool_calls": 14,
        "max_turns": 40,
        "mf_rounds": 5,
        "kb_top_k": 3,
    },
    "bench": {"timeout_s": 60.0, "hf_budget": 60},
    "memory": {"dir": ".rfamp"},
    "llm": {"model": "default", "timeout_s": 60.0},
}

# long-run presets with hour-scale wall-clock limits
PRESETS = {
    "desk": {},
    "long": {"pipeline": {"wall_seconds": 3600.0}, "bench": {"timeout_s": 3600.0}},
    "extended": {"pipeline": {"wall_seconds": 18000.0}, "bench": {"timeout_s": 18000.0}},
}


class ConfigError(ValueError):
    pass


def _overlay(base: dict, extra: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        where = f"{path}.{key}" if path else key
        if isinstance(value, dict):
            if not isinstance(out.get(key, {}), dict):
                raise ConfigError(f"{where}: expected a value, got a section")
            out[key] = _overlay(out.get(key, {}), value, where)
        else:
            out[key] = value
    return out


def load_config(path=None, preset: str = "desk") -> dict:
    """Defaults, then the named preset, then ``path`` (or $RFAMP_CONFIG) if given."""
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}")
    cfg = _overlay(DEFAULTS, PRESETS[preset])
    path = path or os.environ.get("RFAMP_CONFIG")
    if path:
        try:
            with open(path, "rb") as fh:
                cfg = _overlay(cfg, tomllib.load(fh))
        except OSError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return cfg
