"""Simulated annealing with geometric cooling and Metropolis acceptance."""

import math

import numpy as np

from .base import Bounds, CountedCost, OptResult, merged

DEFAULTS = {
    "t0": 1000.0,
    "cooling": 0.995,
    "steps": 2000,
    "step_scale": 0.1,  # Gaussian step sigma as a fraction of each range
    "seed": 0,
    "target": -np.inf,
    "x0": None,
    "max_evals": None,
}


def sa_minimize(cost, bounds: Bounds, cfg=None) -> OptResult:
    cfg = merged(DEFAULTS, cfg)
    if cfg["t0"] < 0 or not 0 < cfg["cooling"] <= 1 or cfg["steps"] < 0:
        raise ValueError("need t0 >= 0, cooling in (0, 1], steps >= 0")
    rng = np.random.default_rng(cfg["seed"])
    f = CountedCost(cost, cfg["max_evals"])
    sigma = cfg["step_scale"] * bounds.span

    x = bounds.clip(cfg["x0"]) if cfg["x0"] is not None else bounds.from_unit(rng.random(bounds.dim))
    cur = f(x)
    best_x, best = x.copy(), cur
    history = [best]
    t = float(cfg["t0"])
    for _ in range(int(cfg["steps"])):
        if best <= cfg["target"] or f.exhausted:
            break
        # the step shrinks with temperature, down to 1% of its initial size
        shrink = max(math.sqrt(t / cfg["t0"]), 0.01) if cfg["t0"] > 0 else 1.0
        cand = bounds.reflect(x + rng.normal(0.0, 1.0, bounds.dim) * sigma * shrink)
        c = f(cand)
        delta = c - cur
        u = rng.random()
        if delta <= 0 or (t > 0 and math.isfinite(delta) and u < math.exp(-delta / t)):
            x, cur = cand, c
            if cur < best:
                best_x, best = x.copy(), cur
        t *= cfg["cooling"]
        history.append(best)
    return OptResult(best_x, best, history, f.evals, cfg["seed"])
