"""Command line entry point: ``check``, ``fuzz`` and ``sweep``.

Exit codes: 0 all checks pass, 1 a theorem check failed, 2 input error,
3 resource or convergence error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields, replace
from pathlib import Path

from sublinear_lab.credal_core import DEFAULT_PATH_BUDGET, Sequence
from sublinear_lab.errors import BudgetExceededError, ConvergenceError, InvalidInputError
from sublinear_lab.fuzz import FuzzConfig, fuzz
from sublinear_lab.inequality_lab import Tolerances, check_all, lhs_m2, sigma_bar_sq
from sublinear_lab.scenario import parse_scenario_file

EXIT_PASS, EXIT_FAIL, EXIT_INPUT, EXIT_RESOURCE = 0, 1, 2, 3
SWEEP_HEADER = "n,lhs,bound,gap"


def sweep(marginal, n_max: int, budget: int = DEFAULT_PATH_BUDGET):
    """Yield ``(n, lhs, bound, gap)`` for ``n = 1..n_max`` iid copies.

    Stops early (raising nothing) at the first ``n`` whose path count
    exceeds ``budget``; the caller learns this from the row count.
    """
    sigma = sigma_bar_sq(Sequence.iid(marginal, 1)).value
    for n in range(1, n_max + 1):
        seq = Sequence.iid(marginal, n)
        if seq.path_count > budget:
            return
        lhs = lhs_m2(seq, budget)
        bound = sigma / n
        yield n, lhs, bound, bound - lhs


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=True) + "\n"


def _parse_tol(items, base: Tolerances) -> Tolerances:
    names = {f.name for f in fields(Tolerances)}
    updates = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or key not in names:
            raise InvalidInputError(f"--tol expects NAME=VALUE with NAME in {sorted(names)}, got {item!r}")
        try:
            updates[key] = float(value)
        except ValueError:
            raise InvalidInputError(f"--tol {key}: {value!r} is not a number") from None
    return replace(base, **updates)


def _load(path: str, budget: int | None):
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise InvalidInputError(f"cannot read scenario {path!r}: {exc.strerror}") from None
    return parse_scenario_file(raw, path_budget=budget)


def cmd_check(args) -> int:
    sf = _load(args.scenario, args.budget)
    tol = _parse_tol(args.tol, sf.tolerances)
    report = check_all(sf.sequence, tol, seed=args.seed, scenario=sf.name or Path(args.scenario).stem,
                       budget=sf.path_budget)
    _emit(_dumps(report.to_dict()), args.out)
    return EXIT_PASS if report.passed else EXIT_FAIL


def cmd_fuzz(args) -> int:
    config = FuzzConfig(seed=args.seed, trials=args.trials,
                        path_budget=args.budget or DEFAULT_PATH_BUDGET)
    summary = fuzz(config, jobs=args.jobs)
    if args.dump_dir and summary["failed"]:
        dump = Path(args.dump_dir)
        dump.mkdir(parents=True, exist_ok=True)
        for rec in summary["records"]:
            if not rec["passed"]:
                (dump / f"trial-{rec['trial']:05d}.json").write_text(_dumps(rec["scenario"]), encoding="utf-8")
    _emit(_dumps(summary), args.out)
    return EXIT_PASS if summary["failed"] == 0 else EXIT_FAIL


def cmd_sweep(args) -> int:
    sf = _load(args.scenario, args.budget)
    seq = sf.sequence
    first = seq.marginals[0]
    if any(mg != first for mg in seq.marginals):
        raise InvalidInputError("sweep needs an iid scenario (all marginals identical)")
    budget = sf.path_budget
    rows = list(sweep(first, args.n_max, budget))
    if len(rows) < args.n_max:
        last = rows[-1][0] if rows else 0
        print(f"sweep truncated after n={last}: path count at n={last + 1} exceeds budget {budget}",
              file=sys.stderr)
    lines = [SWEEP_HEADER] + [",".join(repr(v) for v in row) for row in rows]
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sublinear-lab",
                                     description="Sample-mean inequalities under sublinear expectations.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="verify every inequality on one scenario file")
    p.add_argument("scenario")
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=0, help="seed for sampled directions and test functions")
    p.add_argument("--budget", type=int, help="path enumeration budget")
    p.add_argument("--tol", action="append", metavar="NAME=VALUE", help="tolerance override, repeatable")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("fuzz", help="run the seeded random property campaign")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--out")
    p.add_argument("--budget", type=int, help="path enumeration budget")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--dump-dir", help="write counterexample scenarios here")
    p.set_defaults(func=cmd_fuzz)

    p = sub.add_parser("sweep", help="CSV of lhs and bound for n = 1..n_max iid copies")
    p.add_argument("scenario")
    p.add_argument("--n-max", type=int, required=True)
    p.add_argument("--out")
    p.add_argument("--budget", type=int, help="path enumeration budget")
    p.set_defaults(func=cmd_sweep)
    return parser


def _error(kind: str, exc: Exception, code: int) -> int:
    sys.stdout.write(_dumps({"error": {"kind": kind, "type": type(exc).__name__, "message": str(exc)}}))
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InvalidInputError as exc:
        return _error("input", exc, EXIT_INPUT)
    except BudgetExceededError as exc:
        return _error("resource", exc, EXIT_RESOURCE)
    except ConvergenceError as exc:
        return _error("convergence", exc, EXIT_RESOURCE)
