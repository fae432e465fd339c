import dataclasses
import json
import math
import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfamp import bench
from rfamp import evaluator as ev
from rfamp import mcr
from rfamp.agents import Mode
from rfamp.bench import Method, fom, fom_value, load_suite, run_benchmark, run_evolution, shipped_suite
from rfamp.cli import main
from rfamp.spec import DesignSpec, SpecError

S1 = next(s for s in shipped_suite("benchmark_desk") if s.name == "S1-desk")


# -- suites -------------------------------------------------------------------


def test_shipped_suite():
    suite = load_suite()
    assert len(suite) == 10
    s1, s10 = suite[0], suite[9]
    assert (s1.fc, s1.fbw, s1.power, s1.gain, s1.nf_max, s1.ip1db_min) == (10, 20, 30, 25, 5, -25)
    assert (s10.fc, s10.fbw, s10.power, s10.gain, s10.nf_max, s10.ip1db_min) == (30, 20, 30, 25, 3.5, -15)
    assert all(s.stages == 3 and s.load.r_load == 1787.0 for s in suite)


def test_suite_errors(tmp_path):
    empty = tmp_path / "empty.json"
    empty.write_text("")
    with pytest.raises(SpecError):
        load_suite(empty)
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"specs": [{"fc": 10, "fbw": 20, "power": 30, "gain": 25, "nf_max": 5}]}))
    with pytest.raises(SpecError) as info:
        load_suite(bad)
    assert "specs[0]" in str(info.value) and "ip1db_min" in str(info.value)
    bad.write_text(json.dumps({"specs": [{"fc": 10, "fbw": 120, "power": 30, "gain": 25, "nf_max": 5,
                                          "ip1db_min": -25}]}))
    with pytest.raises(SpecError) as info:
        load_suite(bad)
    assert "fbw" in str(info.value)


# -- figure of merit ----------------------------------------------------------


def test_fom_example():
    assert fom_value(20.0, 6.0, 10 * math.log10(2.0), 30.0) == pytest.approx(20.0, rel=1e-12)


@pytest.fixture(scope="module")
def report():
    m = mcr.to_physical(mcr.MCRParams(0.4, 2 * math.pi * 30e9, 3.0, 120.0), 40.0)
    cand = ev.CandidateDesign((90.0, 72.0, 72.0, 400.0, 400.0, 400.0), (m, m, m), (300.0, 250.0, 60.0))
    spec = DesignSpec(fc=30.0, fbw=20.0, power=40.0, gain=20.0, nf_max=5.0, ip1db_min=-25.0)
    return ev.fullchain_report(cand, spec), spec


def test_fom_from_report(report):
    rep, spec = report
    flat = dataclasses.replace(rep, gain_db=[20.0] * len(rep.gain_db), nf_db=10 * math.log10(2.0), power_ma=30.0,
                               band_ghz=[27.0, 33.0])
    assert fom(flat, spec) == pytest.approx(20.0, rel=1e-12)
    assert fom(dataclasses.replace(flat, power_ma=60.0), spec) == pytest.approx(10.0, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 40), st.floats(0.1, 20), st.floats(0.1, 8), st.floats(0.1, 8), st.floats(1, 100))
def test_fom_monotone_in_noise(g, bw, nf_a, nf_b, p):
    if nf_a == nf_b:
        return
    lo, hi = sorted((nf_a, nf_b))
    assert fom_value(g, bw, lo, p) > fom_value(g, bw, hi, p)
    assert fom_value(g, bw, lo, 2 * p) == pytest.approx(fom_value(g, bw, lo, p) / 2, rel=1e-12)


# -- runners ------------------------------------------------------------------


def test_zero_budget_baseline():
    before = ev.HF_COUNTER.value
    res = run_benchmark([S1], Method.GA_VANILLA, [0, 1], {"hf_evals": 0})
    assert res[0].pass_at_1 == 0.0 and res[0].hf_evals == [0, 0]
    assert ev.HF_COUNTER.value == before


@pytest.mark.parametrize("method", [Method.GA_VANILLA, Method.BO_SUBTOOL, Method.GA_WTOOL])
def test_baseline_accounting(method):
    before = ev.HF_COUNTER.value
    rec = bench.run_baseline(method, S1, 0, 4, 30.0)
    assert rec.hf_evals == ev.HF_COUNTER.value - before
    assert rec.hf_evals <= 4 and not rec.invalid


def test_agent_accounting_and_pass_rate():
    before = ev.HF_COUNTER.value
    res = run_benchmark([S1], Method.AGENT, [0], {"hf_evals": 60})[0]
    assert res.hf_evals[0] == ev.HF_COUNTER.value - before
    assert res.pass_at_1 == 1.0 and res.avg_prompt_tokens == 0
    assert res.pass_at_1 in {i / len(res.seeds) for i in range(len(res.seeds) + 1)}


def test_single_task_ladder_identical():
    cold = run_evolution(S1, [25.0], Mode.AUTONOMOUS, seed=0)
    warm = run_evolution(S1, [25.0], Mode.RETRIEVE, seed=0)
    assert cold.hf_per_task == warm.hf_per_task and cold.fom == warm.fom
    assert len(cold.fom) == len(cold.gains) == 1


def test_ladder_trace_lengths():
    tr = run_evolution(S1, [20.0, 25.0], Mode.RETRIEVE, seed=0)
    assert len(tr.fom) == len(tr.hf_per_task) == len(tr.cumulative_hf) == 2
    assert tr.cumulative_hf == [tr.hf_per_task[0], sum(tr.hf_per_task)]


# -- CLI ----------------------------------------------------------------------


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


# infinite thresholds travel as JSON Infinity
OPEN = {"fc": 30, "fbw": 20, "power": 40, "gain": math.inf, "nf_max": math.inf, "ip1db_min": -math.inf}


def test_cli_design_open_spec(tmp_path):
    spec = write(tmp_path / "open.json", OPEN)
    out = tmp_path / "r.json"
    assert main(["design", "--spec", spec, "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["success"] and data["report"]["error"] == ""


def test_cli_design_failure_and_errors(tmp_path):
    hard = write(tmp_path / "hard.json", {**OPEN, "gain": 60, "nf_max": 0.5, "ip1db_min": 10})
    assert main(["design", "--spec", hard, "--budget-hf", "3", "--out", str(tmp_path / "h.json")]) == 2
    assert main(["design", "--spec", str(tmp_path / "missing.json"), "--out", str(tmp_path / "x.json")]) == 1
    assert main(["design"]) == 1
    assert main(["evolve", "--base", hard, "--ladder", "45:20:5", "--out", str(tmp_path)]) == 1


def test_cli_bench_deterministic(tmp_path):
    suite = write(tmp_path / "suite.json", {"specs": [S1.to_dict()]})
    args = ["bench", "--suite", suite, "--method", "GAVanilla", "--seeds", "2", "--budget-hf", "3"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "GAVanilla.json").read_bytes() == (tmp_path / "b" / "GAVanilla.json").read_bytes()
    assert (tmp_path / "a" / "GAVanilla.timing.json").exists()


def test_cli_report_plot(tmp_path):
    spec = write(tmp_path / "open.json", OPEN)
    rep = tmp_path / "r.json"
    main(["design", "--spec", spec, "--out", str(rep)])
    svg = tmp_path / "r.svg"
    assert main(["report", "plot", "--in", str(rep), "--out", str(svg)]) == 0
    text = svg.read_text()
    assert text.startswith("<svg") and len(re.findall("<polyline", text)) == 3
    assert main(["report", "plot", "--in", spec, "--out", str(svg)]) == 1


def test_cli_devgen_and_kb(tmp_path, capsys):
    out = tmp_path / "dev.json"
    assert main(["devgen", "--seed", "3", "--out", str(out)]) == 0
    spec = write(tmp_path / "open.json", OPEN)
    mem = tmp_path / "mem"
    assert main(["design", "--spec", spec, "--mode", "rar", "--tables", str(out), "--memory", str(mem),
                 "--out", str(tmp_path / "r.json")]) == 0
    capsys.readouterr()
    assert main(["kb", "query", "--spec", spec, "-k", "2", "--memory", str(mem)]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert len(rows) == 1 and rows[0]["similarity"] == 1.0
