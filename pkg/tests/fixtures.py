"""Shared fixtures: a seeded lossy three-resonator chain for calibration tests."""

from __future__ import annotations

import math

import numpy as np

from rfamp import device_kb as dkb
from rfamp import evaluator as ev
from rfamp.optim import Bounds, cost_stage3, sa_minimize
from rfamp.spec import DesignSpec
from rfamp.tools import ToolContext, lofi_curves, physical_from_vector, plan_bounds

SPEC = DesignSpec(fc=30.0, fbw=20.0, power=40.0, gain=20.0, nf_max=math.inf, ip1db_min=-math.inf)
LOSS_OHM = (1500.0, 4000.0)  # range of the extra tank loss resistors


class LossyChain:
    """Three MCR-loaded gain stages; the expensive model adds seeded tank losses
    the cheap model does not know about."""

    def __init__(self, seed: int, spec: DesignSpec = SPEC):
        self.spec = spec
        self.ctx = ToolContext(spec)
        t = dkb.default_tables()
        cas = dkb.find_record(t[dkb.DeviceKind.CASCODE], 90.0, 400.0)
        dcs = dkb.find_record(t[dkb.DeviceKind.DIFF_CS], 72.0, 400.0)
        self.records = [cas, cas, dcs, dcs]  # the first entry only feeds the cheap model's head
        rng = np.random.default_rng(seed)
        self.losses = rng.uniform(*LOSS_OHM, size=(3, 2))
        self.bounds: Bounds = plan_bounds(self.ctx, self.records)
        self.head = np.zeros(spec.freq_grid().size)
        self.band = spec.band_mask()
        self.hf_calls = 0

    def lofi(self, x):
        return lofi_curves(self.ctx, self.records, self.head, x)[0]

    def hifi(self, x):
        self.hf_calls += 1
        mcrs = physical_from_vector(self.records, self.spec.load, x)
        blocks = []
        for rec, m, (l1, l2) in zip(self.records[1:], mcrs, self.losses):
            blocks += [ev.ActiveStage(rec), ev.MCRBlock(m, l1, l2)]
        blocks.append(ev.ShuntRC(self.spec.load.r_load, self.spec.load.c_load))
        chain = ev.Chain(blocks, stage_index=[0, 2, 4], mcr_index=[1, 3, 5])
        return ev.small_signal(chain, self.spec.freq_grid())[0]

    def cost(self, curve):
        return cost_stage3(np.asarray(curve)[self.band], self.spec.gain)


def mf_run(seed: int, max_rounds: int = 5):
    """Residual-calibrated planning on the fixture; returns (result, fixture)."""
    from rfamp.optim import calibrate_multifidelity

    fx = LossyChain(seed)
    state = {"x": None, "round": 0}

    def planner(residual):
        corr = 0.0 if residual is None else residual.values

        def cost(x):
            return fx.cost(fx.lofi(x) + corr)

        cfg = {"steps": 1500, "t0": 300.0, "cooling": 0.996, "step_scale": 0.15,
               "seed": seed * 31 + state["round"], "target": 0.0}
        if state["x"] is not None:
            cfg.update(x0=state["x"], t0=20.0, step_scale=0.03, steps=800)
        state["round"] += 1
        state["x"] = sa_minimize(cost, fx.bounds, cfg).best_x
        return state["x"]

    res = calibrate_multifidelity(fx.lofi, fx.hifi, planner, max_rounds, grid=fx.spec.freq_grid(),
                                  gain_user=fx.spec.gain, mask=fx.band)
    return res, fx


def hf_only_run(seed: int, max_evals: int = 1500):
    """Plain annealing directly on the expensive model until it reaches zero cost."""
    fx = LossyChain(seed)

    def cost(x):
        return fx.cost(fx.hifi(x))

    res = sa_minimize(cost, fx.bounds, {"steps": max_evals - 1, "t0": 300.0, "cooling": 0.996,
                                        "step_scale": 0.15, "seed": seed * 31, "target": 0.0})
    return res, fx


def random_candidate(rng, tables=None) -> ev.CandidateDesign:
    """A candidate with on-grid devices and loosely ranged passives."""
    from rfamp.mcr import MCRPhysical

    t = dkb.default_tables() if tables is None else tables
    cas = t[dkb.DeviceKind.CASCODE]
    dcs = t[dkb.DeviceKind.DIFF_CS]
    recs = [cas[rng.integers(len(cas))], dcs[rng.integers(len(dcs))], dcs[rng.integers(len(dcs))]]
    mcrs = tuple(MCRPhysical(float(rng.uniform(0.1, 0.8)), *rng.uniform(100, 600, 2), *rng.uniform(200, 3000, 2),
                             *rng.uniform(5, 80, 2)) for _ in range(3))
    x3 = (float(rng.uniform(0, 800)), float(rng.uniform(0, 800)), float(rng.uniform(0, 150)))
    return ev.CandidateDesign(tuple([r.width for r in recs] + [r.vbias for r in recs]), mcrs, x3)
