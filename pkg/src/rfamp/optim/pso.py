"""Global-best particle swarm."""

import numpy as np

from .base import Bounds, CountedCost, OptResult, merged

DEFAULTS = {
    "particles": 20,
    "iters": 60,
    "inertia": 0.72,
    "c1": 1.49,
    "c2": 1.49,
    "seed": 0,
    "vmax_frac": 0.2,
    "target": -np.inf,  # stop once the best cost reaches this value
    "x0": None,  # optional seed particle
}


def pso_minimize(cost, bounds: Bounds, cfg=None) -> OptResult:
    cfg = merged(DEFAULTS, cfg)
    if cfg["particles"] < 1 or cfg["iters"] < 0:
        raise ValueError("particles must be >= 1 and iters >= 0")
    rng = np.random.default_rng(cfg["seed"])
    f = CountedCost(cost)
    n, d = int(cfg["particles"]), bounds.dim
    vmax = cfg["vmax_frac"] * bounds.span

    x = bounds.from_unit(rng.random((n, d)))
    if cfg["x0"] is not None:
        x[0] = bounds.clip(cfg["x0"])
    v = (rng.random((n, d)) * 2 - 1) * vmax
    pcost = np.array([f(xi) for xi in x])
    pbest = x.copy()
    g = int(np.argmin(pcost))
    gbest, gcost = pbest[g].copy(), float(pcost[g])
    history = [gcost]

    for _ in range(int(cfg["iters"])):
        if gcost <= cfg["target"]:
            break
        r1, r2 = rng.random((n, d)), rng.random((n, d))
        v = cfg["inertia"] * v + cfg["c1"] * r1 * (pbest - x) + cfg["c2"] * r2 * (gbest - x)
        v = np.clip(v, -vmax, vmax)
        x = x + v
        out = (x < bounds.lo_arr) | (x > bounds.hi_arr)
        x = np.where(out, bounds.reflect(x), x)
        v = np.where(out, -v, v)  # bounce off the walls
        for i in range(n):
            c = f(x[i])
            if c < pcost[i]:
                pcost[i], pbest[i] = c, x[i].copy()
                if c < gcost:
                    gcost, gbest = c, x[i].copy()
        history.append(gcost)

    return OptResult(gbest, gcost, history, f.evals, cfg["seed"])
