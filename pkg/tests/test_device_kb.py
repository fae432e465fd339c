import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfamp import device_kb as dkb
from rfamp.device_kb import CASCODE, DIFF_CS, DeviceKind

from oracles import device_oracle


@pytest.fixture(scope="module")
def tables():
    return dkb.default_tables()


def test_grids():
    assert CASCODE.width_grid[0] == 45 and CASCODE.width_grid[-1] == 180
    assert DIFF_CS.width_grid[-1] == 117
    assert list(CASCODE.vbias_grid) == [300 + 25 * i for i in range(9)]
    for cls in (CASCODE, DIFF_CS):
        assert all(np.diff(cls.width_grid) == 9)


def test_table_sizes():
    assert len(dkb.generate_table(7, CASCODE)) == 144
    assert len(dkb.generate_table(7, DIFF_CS)) == 81


@pytest.mark.parametrize("kind,kappa", [(DeviceKind.CASCODE, 0.9), (DeviceKind.DIFF_CS, 1.1)])
def test_record_matches_device_formula(tables, kind, kappa):
    rec = dkb.find_record(tables[kind], 90.0, 400.0)
    ref = device_oracle(kappa, 90.0, 400.0)
    # frozen from the throwaway re-implementation: 0.9 * 90 * 0.12**2
    if kind is DeviceKind.CASCODE:
        assert ref["id"] == pytest.approx(1.1664, rel=1e-12)
    assert rec.id == pytest.approx(ref["id"], rel=1e-12)
    assert rec.gm == pytest.approx(ref["gm"], rel=1e-12)
    assert rec.cin == pytest.approx(ref["cin"])
    assert rec.cs_out == pytest.approx(ref["cs_out"])
    assert rec.rs_out == pytest.approx(ref["rs_out"])


def test_scatter_stays_small(tables):
    for kind, recs in tables.items():
        for r in recs:
            clean = dkb.make_record(kind, r.width, r.vbias)
            assert abs(r.nf_min - clean.nf_min) <= 0.05
            assert abs(r.ip1db_stage - clean.ip1db_stage) <= 0.05
            assert r.id == clean.id and r.gm == clean.gm


def test_record_invariants(tables):
    for recs in tables.values():
        for r in recs:
            assert r.id > 0 and r.gm > 0 and r.rs_out > 0 and r.cs_out >= 0 and r.cin > 0
            assert len(r.zin) == len(dkb.REF_FREQS_GHZ)


def test_zin_is_rc_network(tables):
    r = tables[DeviceKind.CASCODE][10]
    w = 2 * math.pi * np.asarray(dkb.REF_FREQS_GHZ) * 1e9
    y = 1.0 / np.asarray(r.zin)
    assert np.allclose(y.real, 1.0 / r.rin)
    assert np.allclose(y.imag / w, r.cin * 1e-15)


@pytest.mark.parametrize("cls", [CASCODE, DIFF_CS])
def test_monotone_in_width_and_bias(cls):
    recs = {(r.width, r.vbias): r for r in dkb.generate_table(3, cls)}
    for v in cls.vbias_grid:
        ids = [recs[(w, v)].id for w in cls.width_grid]
        gms = [recs[(w, v)].gm for w in cls.width_grid]
        assert all(np.diff(ids) >= 0) and all(np.diff(gms) >= 0)
    for w in cls.width_grid:
        ids = [recs[(w, v)].id for v in cls.vbias_grid]
        assert all(np.diff(ids) >= 0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_generate_is_pure(seed):
    a = [r.to_dict() for r in dkb.generate_table(seed, DIFF_CS)]
    b = [r.to_dict() for r in dkb.generate_table(seed, DIFF_CS)]
    assert json.dumps(a) == json.dumps(b)


def test_dump_load_roundtrip(tmp_path, tables):
    path = tmp_path / "t.json"
    dkb.dump_tables(tables, path)
    back = dkb.load_tables(path)
    for kind in DeviceKind:
        assert back[kind] == tables[kind]


def test_lookup_by_current(tables):
    t = tables[DeviceKind.CASCODE]
    assert len(dkb.lookup_by_current(t, math.inf)) == len(t)
    assert dkb.lookup_by_current(t, 1e-4) == []
    med = float(np.median([r.id for r in t]))
    got = dkb.lookup_by_current(t, med)
    brute = sorted((r for r in t if r.id <= med), key=lambda r: (r.width, r.vbias))
    assert got == brute
    with pytest.raises(ValueError):
        dkb.lookup_by_current(t, 0.0)


def test_allocate_four_configs(tables):
    cfgs = dkb.allocate([0.4, 0.3, 0.3], 30.0, dkb.stage_classes(3), tables)
    assert len(cfgs) == 4
    assert len({tuple(r.key for r in c.records) for c in cfgs}) == 4


def test_allocate_infeasible(tables):
    lowest = min(r.id for r in tables[DeviceKind.CASCODE])
    with pytest.raises(dkb.InfeasibleBudget):
        dkb.allocate([1.0], lowest * 0.5, [CASCODE], tables)


def test_allocate_against_pair_enumeration(tables):
    budget = 20.0
    cfgs = dkb.allocate([0.5, 0.5], budget, [CASCODE, DIFF_CS], tables)
    feasible = [(a, b) for a, b in itertools.product(tables[DeviceKind.CASCODE], tables[DeviceKind.DIFF_CS])
                if a.id <= 0.5 * budget and b.id <= 0.5 * budget]
    pairs = {(a.key, b.key) for a, b in feasible}
    widths0 = [a.width for a, _ in feasible]
    widths1 = [b.width for _, b in feasible]
    assert cfgs
    for c in cfgs:
        assert c.total_current <= budget
        assert (c.records[0].key, c.records[1].key) in pairs
        assert c.records[0].width in (min(widths0), max(widths0))
        assert c.records[1].width in (min(widths1), max(widths1))


@settings(max_examples=60, deadline=None)
@given(st.floats(0.15, 0.7), st.floats(0.1, 0.8), st.floats(8.0, 60.0))
def test_allocate_respects_shares(r0, frac, budget):
    r1 = (1 - r0) * frac
    ratios = [r0, r1, 1 - r0 - r1]
    try:
        cfgs = dkb.allocate(ratios, budget, dkb.stage_classes(3))
    except dkb.InfeasibleBudget:
        return
    assert 1 <= len(cfgs) <= 4
    for c in cfgs:
        for rec, ratio in zip(c.records, ratios):
            assert rec.id <= ratio * budget
        assert c.total_current <= budget * (1 + 1e-9)
