"""Gaussian-process Bayesian optimization with expected improvement."""

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.stats import norm, qmc

from .base import Bounds, CountedCost, OptResult, merged

DEFAULTS = {
    "evals": 30,
    "init": 10,
    "length_scale": 0.2,
    "noise": 1e-6,
    "candidates": 256,
    "seed": 0,
    "target": -np.inf,
}


def _kernel(a, b, ls):
    d2 = np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=-1)
    return np.exp(-0.5 * d2 / (ls * ls))


class GP:
    """Zero-mean GP on standardized targets with a fixed squared-exponential kernel."""

    def __init__(self, x, y, ls, noise):
        self.x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        self.mu = float(np.mean(y))
        self.sd = float(np.std(y)) or 1.0
        z = (y - self.mu) / self.sd
        self.ls = ls
        k = _kernel(self.x, self.x, ls) + noise * np.eye(len(self.x))
        self.chol = cho_factor(k, lower=True)
        self.alpha = cho_solve(self.chol, z)

    def predict(self, xq):
        ks = _kernel(np.asarray(xq, dtype=float), self.x, self.ls)
        mean = ks @ self.alpha
        v = cho_solve(self.chol, ks.T)
        var = np.maximum(1.0 - np.sum(ks * v.T, axis=1), 1e-12)
        return self.mu + self.sd * mean, self.sd * np.sqrt(var)


def expected_improvement(mean, std, best):
    z = (best - mean) / std
    return (best - mean) * norm.cdf(z) + std * norm.pdf(z)


def bo_minimize(cost, bounds: Bounds, cfg=None) -> OptResult:
    cfg = merged(DEFAULTS, cfg)
    rng = np.random.default_rng(cfg["seed"])
    f = CountedCost(cost)
    d, budget = bounds.dim, int(cfg["evals"])
    n_init = min(int(cfg["init"]), budget)

    xs, ys, history = [], [], []
    if n_init > 0:
        lhs = qmc.LatinHypercube(d=d, seed=rng).random(n_init)
        for u in lhs:
            xs.append(u)
            ys.append(f(bounds.from_unit(u)))
            history.append(f.best_cost)
    while f.evals < budget and f.best_cost > cfg["target"]:
        finite = np.isfinite(ys)
        y_fit = np.where(finite, ys, np.max(np.asarray(ys)[finite]) if finite.any() else 0.0)
        gp = GP(np.array(xs), y_fit, cfg["length_scale"], cfg["noise"])
        cand = rng.random((int(cfg["candidates"]), d))
        mean, std = gp.predict(cand)
        u = cand[int(np.argmax(expected_improvement(mean, std, float(np.min(y_fit)))))]
        xs.append(u)
        ys.append(f(bounds.from_unit(u)))
        history.append(f.best_cost)

    best_x = f.best_x if f.best_x is not None else bounds.from_unit(np.full(d, 0.5))
    return OptResult(best_x, f.best_cost, history, f.evals, cfg["seed"])
