"""Command line interface: ``oddo generate | evaluate | verify | solve-offline | run-online``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import io
from .experiments import (CANDIDATES, FORMATS, PROBLEMS, TRAINING_SIZES, ExperimentConfig, _scenario, evaluate,
                          summary_document, write_results)
from .model import DomainError, ModelError
from .offline import SolverError, solve_offline
from .online import STRATEGIES, OnlineError, run_online
from .problems import example_e
from .projection import InfeasiblePrefix
from .simplex import LPError
from .verify import SUITES, run_suite

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3
SOLVER_ERRORS = (SolverError, LPError, OnlineError, InfeasiblePrefix, DomainError)


def _emit(text, out=None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _candidates(values):
    if not values:
        return CANDIDATES
    out = []
    for v in values:
        out.extend(s for s in v.split(",") if s)
    return tuple(dict.fromkeys("median" if c == "med" else c for c in out))


def cmd_generate(args) -> int:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    if args.problem == "example-e":
        io.save_instance(example_e(), out / "example-e.json")
        io.write_cost_stream(example_e(), out / "example-e.costs.jsonl")
        print(out / "example-e.json")
        return EXIT_OK
    cfg = ExperimentConfig(args.problem, args.training_size, ("exact",), args.tests, args.seed)
    for j in range(cfg.tests):
        test, hist, params_of, _ = _scenario(cfg, j)
        stem = f"{args.problem}-{args.seed}-{j:04d}"
        io.save_instance(test, out / f"{stem}.json")
        io.write_cost_stream(test, out / f"{stem}.costs.jsonl")
        entries = [(k, m, params_of(inst)) for k, (inst, m) in enumerate(hist)]
        (out / f"{stem}.history.json").write_text(io.dumps(io.history_to_list(entries)) + "\n")
        print(out / f"{stem}.json")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = ExperimentConfig(args.problem, args.training_size, _candidates(args.candidate), args.tests, args.seed,
                           args.format, args.workers)
    result = evaluate(cfg)
    if args.out:
        for p in write_results(result, args.out):
            print(p, file=sys.stderr)
    print(json.dumps(summary_document(result), indent=1, sort_keys=True))
    if result.failures:
        return EXIT_SOLVER
    bad = [r for r in result.records if r.status == "ok" and r.offline > 0 and r.ratio < 1 - 1e-9]
    return EXIT_INVARIANT if bad else EXIT_OK


def cmd_verify(args) -> int:
    names = SUITES if args.suite == "all" else (args.suite,)
    reports = [run_suite(n, seed=args.seed) for n in names]
    if args.format == "json":
        _emit(json.dumps([r.to_dict() for r in reports], indent=1, sort_keys=True) + "\n", args.out)
    else:
        _emit("".join(f"[{r.suite}]\n" + "".join(line + "\n" for line in r.lines()) for r in reports), args.out)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_INVARIANT


def cmd_solve_offline(args) -> int:
    inst = io.load_instance(args.instance)
    sol = solve_offline(inst)
    _emit(io.dumps(sol.to_dict()) + "\n", args.out)
    return EXIT_OK if sol.kkt.ok(1e-6) else EXIT_INVARIANT


def cmd_run_online(args) -> int:
    inst = io.load_instance(args.instance)
    if args.multipliers:
        m = io.load_multipliers(args.multipliers)
    else:
        m = solve_offline(inst).multipliers
    stream = io.read_cost_stream(args.costs) if args.costs else None
    trace = run_online(inst, m, strategy=args.strategy, cost_stream=stream)
    _emit(io.dumps(trace.to_dict()) + "\n", args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="oddo", description="Online optimization from predicted Lagrange multipliers.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, tests_default=1):
        sp.add_argument("--problem", choices=PROBLEMS, required=True)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--training-size", type=int, choices=TRAINING_SIZES, default=10)
        sp.add_argument("--tests", type=int, default=tests_default)
        sp.add_argument("--out")

    g = sub.add_parser("generate", help="write seeded instances, cost streams and training histories")
    common(g)
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("evaluate", help="train, predict, run online and report ratios")
    common(e, tests_default=10)
    e.add_argument("--candidate", action="append", help=f"one of {', '.join(CANDIDATES)}; repeat or comma-separate")
    e.add_argument("--format", choices=FORMATS, default="csv")
    e.add_argument("--workers", type=int, default=1)
    e.set_defaults(func=cmd_evaluate)

    v = sub.add_parser("verify", help="run an invariant suite")
    v.add_argument("--suite", choices=(*SUITES, "all"), default="all")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--format", choices=("text", "json"), default="text")
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("solve-offline", help="solve an instance file with multipliers and KKT report")
    s.add_argument("instance")
    s.add_argument("--out")
    s.set_defaults(func=cmd_solve_offline)

    r = sub.add_parser("run-online", help="replay costs stage by stage with a multiplier prediction")
    r.add_argument("instance")
    r.add_argument("--multipliers", help="JSON file with mu and lambda; default: offline optimum")
    r.add_argument("--costs", help="JSON-lines cost stream; default: the instance's costs")
    r.add_argument("--strategy", choices=STRATEGIES, default="auto")
    r.add_argument("--out")
    r.set_defaults(func=cmd_run_online)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SOLVER_ERRORS as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ModelError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"bad configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
