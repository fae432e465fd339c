"""Real-coded genetic algorithm: tournament selection, uniform crossover,
Gaussian mutation with clamping, single elite."""

import numpy as np

from .base import Bounds, CountedCost, OptResult, merged

DEFAULTS = {
    "pop": 40,
    "generations": 100,
    "tournament": 3,
    "p_cross": 0.8,
    "p_mut": 0.1,
    "sigma_frac": 0.05,
    "elite": 1,
    "seed": 0,
    "target": -np.inf,
    "max_evals": None,
}


def ga_minimize(cost, bounds: Bounds, cfg=None) -> OptResult:
    cfg = merged(DEFAULTS, cfg)
    rng = np.random.default_rng(cfg["seed"])
    f = CountedCost(cost, cfg["max_evals"])
    n, d = int(cfg["pop"]), bounds.dim
    sigma = cfg["sigma_frac"] * bounds.span

    pop = bounds.from_unit(rng.random((n, d)))
    fit = np.full(n, np.inf)
    for i in range(n):
        if f.exhausted:
            break
        fit[i] = f(pop[i])
    history = [f.best_cost] if f.evals else []

    def pick():
        idx = rng.integers(0, n, size=int(cfg["tournament"]))
        return pop[idx[np.argmin(fit[idx])]]

    for _ in range(int(cfg["generations"])):
        if f.exhausted or f.best_cost <= cfg["target"]:
            break
        order = np.argsort(fit, kind="stable")
        children = [pop[i].copy() for i in order[: int(cfg["elite"])]]
        child_fit = [fit[i] for i in order[: int(cfg["elite"])]]
        while len(children) < n:
            a, b = pick(), pick()
            if rng.random() < cfg["p_cross"]:
                mask = rng.random(d) < 0.5
                child = np.where(mask, a, b)
            else:
                child = a.copy()
            mut = rng.random(d) < cfg["p_mut"]
            child = bounds.clip(child + mut * rng.normal(0.0, 1.0, d) * sigma)
            if f.exhausted:
                break
            children.append(child)
            child_fit.append(f(child))
        pop = np.array(children + [pop[i] for i in order[len(children):n]])[:n]
        fit = np.array(child_fit + [fit[i] for i in order[len(child_fit):n]])[:n]
        history.append(f.best_cost)

    best_x = f.best_x if f.best_x is not None else bounds.from_unit(np.full(d, 0.5))
    return OptResult(best_x, f.best_cost, history, f.evals, cfg["seed"])
