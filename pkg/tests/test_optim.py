import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfamp.optim import (Bounds, CalibrationFailed, Residual, bo_minimize, calibrate_multifidelity, cost_stage2,
                         cost_stage3, ga_minimize, pso_minimize, sa_minimize)

from fixtures import mf_run


def sphere(x):
    return float(np.sum(np.asarray(x) ** 2))


def box(d, lo=-5.0, hi=5.0):
    return Bounds.from_pairs([(lo, hi)] * d)


class Tally:
    def __init__(self, fn):
        self.fn, self.calls = fn, 0

    def __call__(self, x):
        self.calls += 1
        return self.fn(x)


# -- costs ------------------------------------------------------------------


def test_cost_stage2_examples():
    assert cost_stage2(4.5, -25, 5, 0.2) == 0.0
    assert cost_stage2(5.0, -18, 5, 0.2) == pytest.approx(2200.0, abs=1e-9)
    assert cost_stage2(5.0, -25, 5, 0.5) == pytest.approx(500.0, abs=1e-9)
    assert cost_stage2(5.0, -18, 5) == cost_stage2(5.0, -18, 5, 0.2)


def test_cost_stage3_examples():
    assert cost_stage3([23, 24.5, 26], 25) == 0.0
    assert cost_stage3([18, 21, 24], 25) == 7000.0
    assert cost_stage3([25.0] * 7, 25) == 0.0
    with pytest.raises(ValueError):
        cost_stage3([], 25)


finite = st.floats(-60, 60, allow_nan=False)


@settings(max_examples=1000, deadline=None)
@given(finite, finite, finite, st.floats(0, 5))
def test_cost_stage2_property(nf, s11, nfu, head):
    c = cost_stage2(nf, s11, nfu, head)
    ref = 1000 * max(0.0, nf - (nfu - head)) + 1000 * max(0.0, s11 + 20)
    assert c == ref and c >= 0
    assert (c == 0) == (nf <= nfu - head and s11 <= -20)


@settings(max_examples=1000, deadline=None)
@given(st.lists(finite, min_size=1, max_size=30), finite)
def test_cost_stage3_property(curve, g):
    c = cost_stage3(curve, g)
    lo, hi = min(curve), max(curve)
    assert c == 1000 * max(0.0, abs(g - lo) - 3) + 1000 * max(0.0, hi - lo - 3)
    assert (c == 0) == (abs(g - lo) <= 3 and hi - lo <= 3)


# -- bounds -----------------------------------------------------------------


def test_bounds_validation():
    with pytest.raises(ValueError):
        Bounds((0.0,), (0.0,))
    with pytest.raises(ValueError):
        Bounds((), ())


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3))
def test_reflect_stays_inside(x):
    b = Bounds.from_pairs([(-1, 2), (0, 1), (10, 20)])
    assert b.contains(b.reflect(x))


# -- optimizers -------------------------------------------------------------

RUNS = {
    "pso": lambda f, b, seed: pso_minimize(f, b, {"iters": 200, "particles": 30, "seed": seed}),
    "sa": lambda f, b, seed: sa_minimize(f, b, {"steps": 5000, "seed": seed, "t0": 1.0, "step_scale": 0.05}),
    "ga": lambda f, b, seed: ga_minimize(f, b, {"generations": 100, "pop": 40, "seed": seed}),
    "bo": lambda f, b, seed: bo_minimize(f, b, {"evals": 30, "seed": seed}),
}


def test_pso_sphere():
    assert RUNS["pso"](sphere, box(8), 0).best_cost < 1e-3


def test_sa_sphere():
    assert RUNS["sa"](sphere, box(4), 0).best_cost < 1e-2


def test_ga_sphere():
    assert RUNS["ga"](sphere, box(8), 0).best_cost < 1e-2


def test_bo_quadratic():
    res = bo_minimize(lambda x: float((x[0] - 0.3) ** 2), Bounds.from_pairs([(-2, 2)]), {"evals": 30})
    assert abs(res.best_x[0] - 0.3) < 1e-2


@pytest.mark.parametrize("name", sorted(RUNS))
def test_contracts(name):
    b = box(3, -2, 3)
    f = Tally(lambda x: sphere(np.asarray(x) - 1.0))
    res = RUNS[name](f, b, 4)
    assert res.evals == f.calls
    assert b.contains(res.best_x)
    assert res.best_cost == min(res.history)
    assert all(np.diff(res.history) <= 0)
    again = RUNS[name](lambda x: sphere(np.asarray(x) - 1.0), b, 4)
    assert again.to_dict() == res.to_dict()


@pytest.mark.parametrize("name", sorted(RUNS))
def test_constant_cost(name):
    res = RUNS[name](lambda x: 3.5, box(2), 1)
    assert res.best_cost == 3.5
    assert all(h == 3.5 for h in res.history)


def test_sa_zero_temperature_is_greedy():
    res = sa_minimize(sphere, box(3), {"t0": 0.0, "steps": 300, "seed": 2})
    assert all(np.diff(res.history) <= 0)


def test_unknown_setting():
    with pytest.raises(ValueError):
        pso_minimize(sphere, box(2), {"swarm": 3})


# -- multi-fidelity ---------------------------------------------------------

GRID = np.linspace(20, 40, 21)


def toy_model(x):
    return 20 + np.full(GRID.size, x[0]) + 0.5 * np.sin(GRID / 3)


def toy_planner(gain_user, aim=1.0):
    def planner(residual):
        corr = 0.0 if residual is None else residual.values
        target = gain_user + aim
        # level shift putting the corrected curve's minimum at the target
        base = toy_model([0.0]) + corr
        return np.array([target - float(np.min(base))])
    return planner


def test_identical_models_converge_in_one_round():
    res = calibrate_multifidelity(toy_model, toy_model, toy_planner(25.0), grid=GRID, gain_user=25.0)
    assert res.hf_calls == 1 and res.converged
    assert np.all(res.residual_history[0].values == 0)


def test_constant_offset_converges_in_two_rounds():
    # the planner lands on the upper tolerance edge, so an unseen +2 dB pushes
    # round 1 out and round 2 plans on the exactly corrected model
    hifi = Tally(lambda x: toy_model(x) + 2.0)
    res = calibrate_multifidelity(toy_model, hifi, toy_planner(25.0, aim=3.0), grid=GRID, gain_user=25.0)
    assert res.hf_calls == hifi.calls == 2
    assert np.allclose(res.residual_history[0].values, 2.0)
    assert np.allclose(res.final_curve, toy_model(res.params) + 2.0)
    assert cost_stage3(res.final_curve, 25.0) == 0


def test_small_offset_absorbed_by_centred_plan():
    res = calibrate_multifidelity(toy_model, lambda x: toy_model(x) + 2.0, toy_planner(25.0), grid=GRID,
                                  gain_user=25.0)
    assert res.hf_calls == 1 and res.converged


def test_calibration_failure_reports_history():
    with pytest.raises(CalibrationFailed) as info:
        calibrate_multifidelity(toy_model, lambda x: toy_model(x) + np.linspace(0, 10, 21),
                                lambda r: np.array([0.0]), max_rounds=3, grid=GRID, gain_user=25.0)
    assert info.value.result.hf_calls == 3
    assert len(info.value.result.residual_history) == 3
    with pytest.raises(ValueError):
        calibrate_multifidelity(toy_model, toy_model, toy_planner(25.0), max_rounds=0)


def test_residual_interpolates():
    r = Residual(np.array([0.0, 1.0, 2.0]), np.array([0.0, 2.0, 0.0]))
    assert r(0.5) == 1.0 and r(1.5) == 1.0
    assert np.all(Residual.zero(GRID)(GRID) == 0)


def test_lossy_fixture_converges():
    res, fx = mf_run(0)
    assert res.converged and res.hf_calls <= 5 and fx.hf_calls == res.hf_calls
    band = np.asarray(res.final_curve)[fx.band]
    assert band.max() - band.min() <= 3.0
