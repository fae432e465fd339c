"""Command-line front end.

Exit codes: 0 on success, 2 when a design misses its targets, 1 on errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import device_kb
from .agents import Mode, RemotePolicy, ScriptedPolicy, run_pipeline
from .agents.core import PolicyError
from .bench import EvolutionTrace, Method, load_suite, run_benchmark, run_evolution
from .config import ConfigError, load_config
from .memory import MemoryStore, StorageError, similarity
from .plot import write_report_svg
from .spec import DesignSpec, SpecError

EXIT_OK, EXIT_ERROR, EXIT_FAILED = 0, 1, 2


class CliError(Exception):
    pass


def _dump(obj, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_spec(path) -> DesignSpec:
    """A spec object, or a suite file holding exactly one spec."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecError(str(exc), str(path)) from exc
    if isinstance(data, dict) and "specs" in data:
        specs = load_suite(path)
        if len(specs) != 1:
            raise SpecError("expected exactly one spec", "specs")
        return specs[0]
    return DesignSpec.from_dict(data)


def _policy(name: str, spec, cfg: dict):
    if name == "remote":
        llm = cfg.get("llm", {})
        return RemotePolicy(model=llm.get("model", "default"), timeout=float(llm.get("timeout_s", 60.0)))
    return ScriptedPolicy(spec)


def _ladder(text: str) -> list:
    try:
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError as exc:
        raise CliError(f"ladder must look like 20:45:5, got {text!r}") from exc
    if step <= 0 or hi < lo:
        raise CliError("ladder needs step > 0 and end >= start")
    n = int(round((hi - lo) / step)) + 1
    return [lo + i * step for i in range(n)]


def cmd_devgen(args, cfg) -> int:
    tables = {kind: device_kb.generate_table(args.seed, device_kb.CLASSES[kind]) for kind in device_kb.DeviceKind}
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    device_kb.dump_tables(tables, args.out)
    print(f"wrote {sum(len(t) for t in tables.values())} records to {args.out}")
    return EXIT_OK


def cmd_design(args, cfg) -> int:
    spec = read_spec(args.spec)
    mode = Mode.RETRIEVE if args.mode == "rar" else Mode.AUTONOMOUS
    budget = {"hf_evals": args.budget_hf} if args.budget_hf is not None else None
    tables = device_kb.load_tables(args.tables) if args.tables else None
    mem = args.memory or (cfg["memory"]["dir"] if mode is Mode.RETRIEVE else None)
    store = MemoryStore(mem) if mem else None
    result = run_pipeline(spec, mode=mode, policy=_policy(args.policy, spec, cfg), seed=args.seed,
                          budget=budget, cfg=cfg, tables=tables, store=store, run_id=f"design-{args.seed}")
    _dump({"spec": spec.to_dict(), "mode": mode.value, "seed": args.seed, **result.to_dict()}, args.out)
    print(f"{'pass' if result.success else 'FAIL'}: {result.hf_evals} expensive evaluations -> {args.out}")
    return EXIT_OK if result.success else EXIT_FAILED


def cmd_bench(args, cfg) -> int:
    suite = load_suite(args.suite)
    budgets = {"hf_evals": args.budget_hf if args.budget_hf is not None else cfg["bench"]["hf_budget"],
               "timeout_s": args.timeout if args.timeout is not None else cfg["bench"]["timeout_s"]}
    seeds = list(range(args.seeds))
    policy = _policy(args.policy, None, cfg) if args.policy == "remote" else None
    results = run_benchmark(suite, args.method, seeds, budgets, cfg, policy)
    out = Path(args.out)
    # results are byte-stable for fixed inputs; wall-clock goes to its own file
    _dump({"method": args.method, "budgets": budgets, "results": [r.to_dict() for r in results]},
          out / f"{args.method}.json")
    _dump({r.spec_id: r.avg_time_s for r in results}, out / f"{args.method}.timing.json")
    for r in results:
        print(f"{r.spec_id}: pass@1 {r.pass_at_1:.1f}  hf {r.hf_evals}")
    return EXIT_OK


def cmd_evolve(args, cfg) -> int:
    base = read_spec(args.base)
    ladder = _ladder(args.ladder)
    modes = [Mode.AUTONOMOUS, Mode.RETRIEVE] if args.mode == "both" else \
        [Mode.RETRIEVE if args.mode == "rar" else Mode.AUTONOMOUS]
    budget = {"hf_evals": args.budget_hf} if args.budget_hf is not None else None
    traces: list[EvolutionTrace] = []
    for seed in range(args.seeds):
        for mode in modes:
            tr = run_evolution(base, ladder, mode, seed=seed, cfg=cfg, budget=budget)
            traces.append(tr)
            print(f"seed {seed} {mode.value}: cumulative hf {tr.cumulative_hf}")
    _dump({"ladder": ladder, "seeds": args.seeds,
           "traces": [{"seed": i // len(modes), **t.to_dict()} for i, t in enumerate(traces)]},
          Path(args.out) / "evolution.json")
    return EXIT_OK


def cmd_kb_query(args, cfg) -> int:
    spec = read_spec(args.spec)
    store = MemoryStore(args.memory or cfg["memory"]["dir"])
    rows = [{"id": r.id, "similarity": round(similarity(spec, r.spec), 6), "spec": r.spec.to_dict(),
             "run_id": r.run_id, "candidate_hash": r.candidate_hash, "passed": r.report.passed}
            for r in store.kb_query(spec, args.k)]
    print(json.dumps(rows, indent=2))
    return EXIT_OK


def cmd_report_plot(args, cfg) -> int:
    try:
        data = json.loads(Path(args.input).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read report {args.input}: {exc}") from exc
    report = data.get("report", data) if isinstance(data, dict) else None
    if not isinstance(report, dict) or not all(k in report for k in ("freq_grid", "gain_db", "s11_db")):
        raise CliError("input holds no report with freq_grid, gain_db and s11_db")
    title = (data.get("spec") or {}).get("name", "") if isinstance(data.get("spec"), dict) else ""
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_report_svg(report, args.out, title)
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rfamp", description="LNA design pipeline and benchmark harness.")
    p.add_argument("--config", help="TOML file overriding the built-in defaults")
    p.add_argument("--preset", default="desk", help="desk, long or extended wall-clock limits")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("devgen", help="write a synthetic device table")
    s.add_argument("--seed", type=int, default=device_kb.DEFAULT_SEED)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_devgen)

    s = sub.add_parser("design", help="run the design pipeline on one spec")
    s.add_argument("--spec", required=True)
    s.add_argument("--mode", choices=("search", "rar"), default="search")
    s.add_argument("--policy", choices=("scripted", "remote"), default="scripted")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--budget-hf", type=int, dest="budget_hf")
    s.add_argument("--tables", help="device table written by devgen")
    s.add_argument("--memory", help="KB/EB directory")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_design)

    s = sub.add_parser("bench", help="run one method over a suite")
    s.add_argument("--suite", required=True)
    s.add_argument("--method", choices=[m.value for m in Method], default="Agent")
    s.add_argument("--seeds", type=int, default=5)
    s.add_argument("--policy", choices=("scripted", "remote"), default="scripted")
    s.add_argument("--budget-hf", type=int, dest="budget_hf")
    s.add_argument("--timeout", type=float)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("evolve", help="solve a gain ladder cold and with retrieval")
    s.add_argument("--base", required=True)
    s.add_argument("--ladder", default="20:45:5")
    s.add_argument("--mode", choices=("both", "search", "rar"), default="both")
    s.add_argument("--seeds", type=int, default=1)
    s.add_argument("--budget-hf", type=int, dest="budget_hf")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_evolve)

    kb = sub.add_parser("kb", help="knowledge base commands")
    kbs = kb.add_subparsers(dest="kb_command", required=True)
    s = kbs.add_parser("query", help="top-k stored designs for a spec")
    s.add_argument("--spec", required=True)
    s.add_argument("-k", type=int, default=3)
    s.add_argument("--memory")
    s.set_defaults(func=cmd_kb_query)

    rp = sub.add_parser("report", help="report commands")
    rps = rp.add_subparsers(dest="report_command", required=True)
    s = rps.add_parser("plot", help="gain/S11/NF curves as SVG")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_report_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse prints usage itself
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    try:
        cfg = load_config(args.config, args.preset)
        return args.func(args, cfg)
    except (CliError, SpecError, ConfigError, StorageError, PolicyError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
