"""Search-space bounds and the common optimizer result."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class Bounds:
    lo: tuple
    hi: tuple
    units: tuple = ()
    names: tuple = ()

    def __post_init__(self):
        if len(self.lo) != len(self.hi) or len(self.lo) == 0:
            raise ValueError("lo and hi must be non-empty and of equal length")
        if any(not h > l for l, h in zip(self.lo, self.hi)):
            raise ValueError("every dimension needs lo < hi")
        for extra in (self.units, self.names):
            if extra and len(extra) != len(self.lo):
                raise ValueError("units/names must match the dimension count")

    @classmethod
    def from_pairs(cls, pairs: Sequence, units=(), names=()) -> "Bounds":
        return cls(tuple(float(p[0]) for p in pairs), tuple(float(p[1]) for p in pairs),
                   tuple(units), tuple(names))

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def lo_arr(self) -> np.ndarray:
        return np.asarray(self.lo, dtype=float)

    @property
    def hi_arr(self) -> np.ndarray:
        return np.asarray(self.hi, dtype=float)

    @property
    def span(self) -> np.ndarray:
        return self.hi_arr - self.lo_arr

    def clip(self, x) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lo_arr, self.hi_arr)

    def reflect(self, x) -> np.ndarray:
        """Mirror out-of-range coordinates back inside (repeatedly if needed)."""
        x = np.asarray(x, dtype=float)
        lo, span = self.lo_arr, self.span
        y = np.mod((x - lo) / span, 2.0)
        y = np.where(y > 1.0, 2.0 - y, y)
        inside = (x >= lo) & (x <= self.hi_arr)
        return np.where(inside, x, np.clip(lo + y * span, lo, self.hi_arr))

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo_arr) and np.all(x <= self.hi_arr))

    def to_unit(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.lo_arr) / self.span

    def from_unit(self, u) -> np.ndarray:
        return self.lo_arr + np.asarray(u, dtype=float) * self.span


@dataclass
class OptResult:
    best_x: np.ndarray
    best_cost: float
    history: list = field(default_factory=list)  # best-so-far per iteration
    evals: int = 0
    seed: int = 0

    def to_dict(self) -> dict:
        return {"best_x": [float(v) for v in self.best_x], "best_cost": float(self.best_cost),
                "history": [float(h) for h in self.history], "evals": int(self.evals),
                "seed": int(self.seed)}


class CountedCost:
    """Wraps a cost function, counting calls and tracking the incumbent."""

    def __init__(self, fn, max_evals=None):
        self.fn = fn
        self.max_evals = max_evals
        self.evals = 0
        self.best_x = None
        self.best_cost = np.inf

    @property
    def exhausted(self) -> bool:
        return self.max_evals is not None and self.evals >= self.max_evals

    def __call__(self, x) -> float:
        self.evals += 1
        c = float(self.fn(np.array(x, dtype=float)))
        if np.isnan(c):
            c = np.inf
        if c < self.best_cost or self.best_x is None:
            self.best_cost = c
            self.best_x = np.array(x, dtype=float)
        return c


def merged(defaults: dict, cfg: dict | None) -> dict:
    out = dict(defaults)
    if cfg:
        unknown = set(cfg) - set(defaults)
        if unknown:
            raise ValueError(f"unknown optimizer settings: {sorted(unknown)}")
        out.update(cfg)
    return out
