"""Command-line entry point: ``helpersel run|compare|certify-ce SCENARIO``.

Exit codes: 0 success, 1 CE certification found violations, 2 invalid scenario,
3 output not writable, 4 instance too large for exact enumeration.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from .benchmark import BudgetExceededError
from .experiments import (InstanceTooLargeError, ScenarioError, certify_ce, compare_strategies,
                          load_scenario, run_scenario)
from .learning import STRATEGIES

EXIT_CE_VIOLATED, EXIT_SCENARIO, EXIT_OUTPUT, EXIT_BUDGET = 1, 2, 3, 4


def _seed_list(text: str) -> tuple:
    try:
        return tuple(int(s) for s in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed list must be integers, got {text!r}") from None


def _strategies(text: str) -> tuple:
    names = tuple(s.strip() for s in text.split(",") if s.strip())
    bad = [n for n in names if n not in STRATEGIES]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"unknown strategies {bad}; choose from {sorted(STRATEGIES)}")
    return names


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="helpersel", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("scenario", help="TOML scenario file")
        p.add_argument("--out", help="output directory (overrides run.out)")
        p.add_argument("--seed-list", type=_seed_list, help="comma-separated seeds (overrides run.seeds)")
        p.add_argument("--replications", type=int, help="replication count (overrides run.replications)")
        p.add_argument("--jobs", type=int, help="parallel worker processes")

    common(sub.add_parser("run", help="run replications and write CSV traces + summary.json"))
    p = sub.add_parser("compare", help="side-by-side table of strategies")
    common(p)
    p.add_argument("--strategies", type=_strategies, help="e.g. rths,r2hs,best-response")
    common(sub.add_parser("certify-ce", help="check the empirical joint play for correlated equilibrium"))
    return parser


def _apply_flags(scenario, args):
    changes = {}
    if args.out is not None:
        changes["out"] = args.out
    if args.seed_list:
        changes["seeds"] = args.seed_list
    if args.replications is not None:
        if args.replications < 1:
            raise ScenarioError("--replications must be at least 1")
        changes["replications"] = args.replications
        if not args.seed_list:
            changes["seeds"] = None
    if args.jobs is not None:
        changes["jobs"] = max(1, args.jobs)
    return replace(scenario, **changes)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scenario = _apply_flags(load_scenario(args.scenario), args)
        if args.command == "run":
            report = run_scenario(scenario)
            print(json.dumps(report.aggregate, indent=2, sort_keys=True))
        elif args.command == "compare":
            rows = compare_strategies(scenario, args.strategies)
            cols = list(rows[0])
            print("  ".join(f"{c:>22}" for c in cols))
            for r in rows:
                print("  ".join(f"{r[c]:>22.4f}" if isinstance(r[c], float) else f"{r[c]:>22}" for c in cols))
        else:
            verdict = certify_ce(scenario)
            status = "PASS" if verdict.passed else "FAIL"
            print(f"{status}: max deviation gain {verdict.max_gain:.4f} vs tolerance {verdict.tolerance:.4f} "
                  f"over {verdict.support} observed profiles")
            for v in verdict.violations:
                print(f"  peer {v.peer}: {v.action} -> {v.alternative} gains {v.gain:.4f}")
            return 0 if verdict.passed else EXIT_CE_VIOLATED
    except FileNotFoundError as exc:
        print(f"error: scenario file not found: {exc.filename}", file=sys.stderr)
        return EXIT_SCENARIO
    except (BudgetExceededError, InstanceTooLargeError) as exc:
        print(f"error (instance too large): {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except ScenarioError as exc:
        print(f"error (scenario): {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    except OSError as exc:
        print(f"error (output): {exc}", file=sys.stderr)
        return EXIT_OUTPUT
    return 0


if __name__ == "__main__":
    sys.exit(main())
