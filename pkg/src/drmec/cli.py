"""Command-line entry point ``drmec``.

Exit codes: 0 success, 2 invalid input, 3 infeasible, 4 numeric failure
(including an oracle check that finds the alternating solver off by more
than its tolerance).
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from drmec.errors import CapacityError, DomainError, InfeasibleError, NumericError
from drmec.model import PowerAllocation, ScenarioConfig, total_power
from drmec.optimizer import METHODS, Solution, alternate, exhaustive_oracle
from drmec.scenario import load_scenario
from drmec.sweep import (
    CSV_COLUMNS,
    PER_UAV_COLUMNS,
    SweepSpec,
    format_csv,
    per_uav_path,
    per_uav_rows,
    run_sweep,
    write_csv,
)
from drmec.validate import KINDS, empirical_satisfaction

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE, EXIT_NUMERIC = 0, 2, 3, 4
ORACLE_REL_TOL = 0.01
VALIDATE_COLUMNS = ("constraint", "kind", "probability", "samples", "half_width", "alpha", "passed")
ORACLE_COLUMNS = ("method", "alternating_w", "oracle_w", "rel_gap", "x_alternating", "x_oracle", "status")

log = logging.getLogger("drmec")


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    values = _float_list(text)
    if any(v != int(v) for v in values):
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    return [int(v) for v in values]


def _method_list(text: str) -> list[str]:
    methods = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in methods if m not in METHODS]
    if bad or not methods:
        raise argparse.ArgumentTypeError(f"methods must be drawn from {','.join(METHODS)}, got {text!r}")
    return methods


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_solve(args) -> int:
    cfg = load_scenario(args.scenario)
    sol = alternate(cfg, args.method)
    report = empirical_satisfaction(cfg, sol, KINDS, args.samples, args.seed)
    b = sol.breakdown
    row = {
        "method": sol.method,
        "n_lower": cfg.n_lower,
        "t_max_s": cfg.upper.delay_budget_s,
        "replication": 0,
        "seed": args.seed,
        "tx_lower_w": b.tx_lower_w,
        "tx_upper_w": b.tx_upper_w,
        "comp_lower_w": b.comp_lower_w,
        "comp_upper_w": b.comp_upper_w,
        "total_w": b.total_w,
        "iterations": sol.iterations,
        "status": "ok",
        "min_empirical_satisfaction": report.min_probability,
    }
    _emit(format_csv([row], CSV_COLUMNS), args.out)
    if args.out:
        write_csv(per_uav_path(args.out), per_uav_rows(cfg, sol), PER_UAV_COLUMNS)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    base = load_scenario(args.scenario)
    kind = {"fleet": "fleet_size", "tmax": "delay_budget", "single": "single"}[args.kind]
    values = args.values or []
    if kind == "fleet_size":
        if any(v != int(v) for v in values):
            raise DomainError("fleet sizes must be integers")
        values = [int(v) for v in values]
    spec = SweepSpec(
        kind=kind,
        values=values,
        methods=args.methods,
        replications=args.reps,
        seed=args.seed,
        n_lower=args.n_lower,
        randomize=not args.no_randomize,
        validate_samples=args.samples,
    )
    summary = run_sweep(spec, base, args.out, jobs=args.jobs)
    if not args.out:
        sys.stdout.write(format_csv(summary.rows, CSV_COLUMNS))
    if summary.n_infeasible:
        log.warning("%d of %d sweep points were infeasible", summary.n_infeasible, len(summary.rows))
    return EXIT_OK


def read_solution(cfg: ScenarioConfig, path) -> Solution:
    """Rebuild a solution from a per-UAV table (or the summary CSV next to one)."""
    path = Path(path)
    if not path.name.endswith(".per_uav" + path.suffix):
        sibling = per_uav_path(path)
        if sibling.exists():
            path = sibling
    try:
        with path.open(newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise DomainError(f"{path}: cannot read solution: {exc.strerror}") from None
    if not rows or "uav" not in rows[0]:
        raise DomainError(f"{path}: not a per-UAV solution table (columns {', '.join(PER_UAV_COLUMNS)})")
    rows = [r for r in rows if r.get("replication", "0") == rows[0].get("replication", "0")]
    lower = [r for r in rows if r["uav"].startswith("lower[")]
    upper = [r for r in rows if r["uav"] == "upper"]
    if len(lower) != cfg.n_lower or len(upper) != 1:
        raise DomainError(f"{path}: solution lists {len(lower)} lower UAVs, scenario has {cfg.n_lower}")
    try:
        x = tuple(int(r["access"]) for r in lower)
        p = PowerAllocation(tuple(float(r["p_tx_w"]) for r in lower), float(upper[0]["p_tx_w"]))
    except (KeyError, ValueError) as exc:
        raise DomainError(f"{path}: malformed solution row: {exc}") from None
    method = rows[0].get("method", "cvar")
    return Solution(x=x, p=p, breakdown=total_power(cfg, x, p), iterations=0, trace=(), method=method, solver="file")


def _cmd_validate(args) -> int:
    cfg = load_scenario(args.scenario)
    sol = read_solution(cfg, args.solution)
    report = empirical_satisfaction(cfg, sol, KINDS, args.samples, args.seed)
    _emit(format_csv(report.rows(), VALIDATE_COLUMNS), args.out)
    log.info("min empirical satisfaction %.6f (%s)", report.min_probability, "pass" if report.passed else "FAIL")
    return EXIT_OK


def _cmd_oracle_check(args) -> int:
    cfg = load_scenario(args.scenario)
    rows, failed = [], False
    for method in args.methods:
        alt = alternate(cfg, method)
        ora = exhaustive_oracle(cfg, method)
        gap = (alt.total_w - ora.total_w) / ora.total_w if ora.total_w else 0.0
        ok = gap <= ORACLE_REL_TOL
        failed |= not ok
        rows.append(
            {
                "method": method,
                "alternating_w": alt.total_w,
                "oracle_w": ora.total_w,
                "rel_gap": gap,
                "x_alternating": "".join(map(str, alt.x)),
                "x_oracle": "".join(map(str, ora.x)),
                "status": "ok" if ok else "violation",
            }
        )
    _emit(format_csv(rows, ORACLE_COLUMNS), args.out)
    return EXIT_NUMERIC if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="drmec", description="Power-minimal offloading for two-layer UAV edge computing.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    scenario_help = "scenario YAML file, or the name of a bundled scenario (paper_defaults)"

    p = sub.add_parser("solve", help="solve one scenario")
    p.add_argument("--scenario", required=True, help=scenario_help)
    p.add_argument("--method", choices=METHODS, default="cvar")
    p.add_argument("--out", help="summary CSV; a per-UAV table is written next to it")
    p.add_argument("--samples", type=int, default=100_000, help="Monte Carlo samples per constraint")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("sweep", help="sweep fleet size or delay budget")
    p.add_argument("--kind", choices=("fleet", "tmax", "single"), required=True)
    p.add_argument("--values", type=_float_list, help="comma-separated fleet sizes or delay budgets in seconds")
    p.add_argument("--n-lower", type=_int_list, help="fleet sizes a tmax sweep is repeated at")
    p.add_argument("--scenario", required=True, help=scenario_help)
    p.add_argument("--methods", type=_method_list, default=["cvar"])
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=100_000, help="Monte Carlo samples per constraint")
    p.add_argument("--no-randomize", action="store_true", help="keep scenario data lengths and task sizes")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("validate", help="Monte Carlo check of a saved solution")
    p.add_argument("--scenario", required=True, help=scenario_help)
    p.add_argument("--solution", required=True, help="CSV written by solve")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("oracle-check", help="compare alternating optimisation with enumeration")
    p.add_argument("--scenario", required=True, help=scenario_help)
    p.add_argument("--methods", type=_method_list, default=list(METHODS))
    p.add_argument("--out")
    p.set_defaults(func=_cmd_oracle_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InfeasibleError as exc:
        print(f"drmec: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NumericError as exc:
        print(f"drmec: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DomainError, CapacityError) as exc:
        print(f"drmec: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
