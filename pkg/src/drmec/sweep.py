"""Experiment sweeps over fleet size or delay budget, written as CSV.

Each replication redraws data lengths and task sizes uniformly from
[40, 60] kbit and [40, 100] kcycles, seeded per ``(seed, replication, uav)``.
Fleets are nested: UAV ``i`` gets the same draw whatever the fleet size,
so a fleet sweep adds UAVs to an otherwise unchanged system.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from drmec.errors import DomainError, InfeasibleError
from drmec.model import ScenarioConfig
from drmec.optimizer import METHODS, Solution, alternate
from drmec.validate import KINDS, empirical_satisfaction

CSV_SCHEMA_VERSION = 1
CSV_COLUMNS = (
    "method",
    "n_lower",
    "t_max_s",
    "replication",
    "seed",
    "tx_lower_w",
    "tx_upper_w",
    "comp_lower_w",
    "comp_upper_w",
    "total_w",
    "iterations",
    "status",
    "min_empirical_satisfaction",
)
PER_UAV_COLUMNS = ("method", "replication", "uav", "access", "destination", "p_tx_w", "data_len_bits", "task_cycles")

DATA_BITS_RANGE = (40e3, 60e3)
TASK_CYCLES_RANGE = (40e3, 100e3)
SWEEP_KINDS = ("fleet_size", "delay_budget", "single")


@dataclass(frozen=True)
class SweepSpec:
    """What to sweep.

    ``values`` holds fleet sizes for ``fleet_size`` and delay budgets in
    seconds for ``delay_budget``.  ``n_lower`` lists the fleet sizes a
    delay-budget sweep is repeated at (default: the base fleet size).
    ``single`` solves the base fleet size once per replication.
    """

    kind: str
    values: tuple = ()
    methods: tuple[str, ...] = ("cvar",)
    replications: int = 1
    seed: int = 0
    n_lower: tuple[int, ...] | None = None
    randomize: bool = True
    validate_samples: int = 100_000

    def __post_init__(self):
        if self.kind not in SWEEP_KINDS:
            raise DomainError(f"kind must be one of {SWEEP_KINDS}, got {self.kind!r}")
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.kind != "single":
            if not self.values:
                raise DomainError("values must be nonempty")
            if any(b <= a for a, b in zip(self.values, self.values[1:])):
                raise DomainError(f"values must be strictly increasing, got {list(self.values)}")
        if self.kind == "fleet_size" and any(int(v) != v or v < 1 for v in self.values):
            raise DomainError("fleet sizes must be positive integers")
        if self.kind == "delay_budget" and any(not (math.isfinite(v) and v > 0) for v in self.values):
            raise DomainError("delay budgets must be finite and > 0")
        if not self.methods or any(m not in METHODS for m in self.methods):
            raise DomainError(f"methods must be a nonempty subset of {METHODS}, got {list(self.methods)}")
        if self.replications < 1:
            raise DomainError("replications must be >= 1")
        if self.n_lower is not None:
            object.__setattr__(self, "n_lower", tuple(int(n) for n in self.n_lower))
            if not self.n_lower or min(self.n_lower) < 1:
                raise DomainError("n_lower must list positive fleet sizes")
        if self.validate_samples < 1:
            raise DomainError("validate_samples must be >= 1")


@dataclass(frozen=True)
class SweepSummary:
    rows: tuple[dict, ...]
    per_uav: tuple[dict, ...]
    out_path: Path | None
    per_uav_path: Path | None

    @property
    def n_infeasible(self) -> int:
        return sum(r["status"] == "infeasible" for r in self.rows)


def build_fleet(base: ScenarioConfig, n_lower: int, replication: int, seed: int, randomize: bool = True):
    """A fleet of ``n_lower`` UAVs derived from ``base``.

    UAV ``i`` copies ``base.lower[i % len(base.lower)]``; with ``randomize``
    its data length and task size are redrawn.  The offload cap is clamped
    to the fleet size.
    """
    lower = []
    for i in range(n_lower):
        u = base.lower[i % base.n_lower]
        if randomize:
            rng = np.random.default_rng([seed, replication, i])
            u = dataclasses.replace(
                u,
                data_len_bits=float(rng.uniform(*DATA_BITS_RANGE)),
                task_cycles=float(rng.uniform(*TASK_CYCLES_RANGE)),
            )
        lower.append(u)
    return dataclasses.replace(base, lower=tuple(lower), max_offload=min(base.max_offload, n_lower))


def _points(spec: SweepSpec, base: ScenarioConfig) -> list[tuple]:
    """Sweep points as ``(method, n_lower, t_max or None, replication)`` in output order."""
    if spec.kind == "fleet_size":
        grid = [(int(n), None) for n in spec.values]
    elif spec.kind == "delay_budget":
        grid = [(n, float(t)) for n in (spec.n_lower or (base.n_lower,)) for t in spec.values]
    else:
        grid = [(n, None) for n in (spec.n_lower or (base.n_lower,))]
    return [(m, n, t, r) for m in spec.methods for n, t in grid for r in range(spec.replications)]


def _validation_seed(seed: int, replication: int) -> int:
    return int(np.random.SeedSequence([seed, replication]).generate_state(1)[0])


def _run_point(args) -> tuple[dict, list[dict]]:
    spec, base, (method, n, t_max, rep) = args
    cfg = build_fleet(base, n, rep, spec.seed, spec.randomize)
    if t_max is not None:
        cfg = cfg.with_delay_budget(t_max)
    row = {
        "method": method,
        "n_lower": n,
        "t_max_s": cfg.upper.delay_budget_s,
        "replication": rep,
        "seed": spec.seed,
    }
    try:
        sol = alternate(cfg, method)
    except InfeasibleError:
        nan = float("nan")
        row.update(
            tx_lower_w=nan, tx_upper_w=nan, comp_lower_w=nan, comp_upper_w=nan, total_w=nan,
            iterations=0, status="infeasible", min_empirical_satisfaction=nan,
        )
        return row, []
    report = empirical_satisfaction(cfg, sol, KINDS, spec.validate_samples, _validation_seed(spec.seed, rep))
    b = sol.breakdown
    row.update(
        tx_lower_w=b.tx_lower_w,
        tx_upper_w=b.tx_upper_w,
        comp_lower_w=b.comp_lower_w,
        comp_upper_w=b.comp_upper_w,
        total_w=b.total_w,
        iterations=sol.iterations,
        status="ok",
        min_empirical_satisfaction=report.min_probability,
    )
    return row, per_uav_rows(cfg, sol, rep)


def per_uav_rows(cfg: ScenarioConfig, sol: Solution, replication: int = 0) -> list[dict]:
    rows = []
    for i, (u, xi, p) in enumerate(zip(cfg.lower, sol.x, sol.p.p_lower_w)):
        rows.append(
            {
                "method": sol.method,
                "replication": replication,
                "uav": f"lower[{i}]",
                "access": xi,
                "destination": "upper" if xi else "bs",
                "p_tx_w": p,
                "data_len_bits": u.data_len_bits,
                "task_cycles": u.task_cycles,
            }
        )
    rows.append(
        {
            "method": sol.method,
            "replication": replication,
            "uav": "upper",
            "access": "",
            "destination": "bs",
            "p_tx_w": sol.p.p_upper_w,
            "data_len_bits": sum(u.data_len_bits for u, xi in zip(cfg.lower, sol.x) if xi),
            "task_cycles": sum(u.task_cycles for u, xi in zip(cfg.lower, sol.x) if xi),
        }
    )
    return rows


def _fmt(value) -> str:
    # repr round-trips floats exactly, so reruns are byte-identical
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_csv(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def write_csv(path, rows: Sequence[dict], columns: Sequence[str]) -> Path:
    path = Path(path)
    path.write_text(format_csv(rows, columns))
    return path


def per_uav_path(out_path) -> Path:
    p = Path(out_path)
    return p.with_name(p.stem + ".per_uav" + p.suffix)


def run_sweep(spec: SweepSpec, base: ScenarioConfig, out_path=None, *, jobs: int = 1) -> SweepSummary:
    """Solve and validate every sweep point; write rows in sweep order.

    Infeasible points become rows with ``status=infeasible``.  With
    ``jobs > 1`` points run in worker processes; output order does not
    depend on completion order.  Single runs also write a per-UAV power
    table next to ``out_path``.
    """
    if jobs < 1:
        raise DomainError("jobs must be >= 1")
    tasks = [(spec, base, pt) for pt in _points(spec, base)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_point, tasks))
    else:
        results = [_run_point(t) for t in tasks]
    rows = tuple(r for r, _ in results)
    per_uav = tuple(u for _, us in results for u in us) if spec.kind == "single" else ()
    written = extra = None
    if out_path is not None:
        written = write_csv(out_path, rows, CSV_COLUMNS)
        if spec.kind == "single":
            extra = write_csv(per_uav_path(out_path), per_uav, PER_UAV_COLUMNS)
    return SweepSummary(rows=rows, per_uav=per_uav, out_path=written, per_uav_path=extra)
