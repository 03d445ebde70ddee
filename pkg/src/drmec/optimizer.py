"""Joint access/power optimisation.

The objective is separable once the access vector is fixed: each lower
UAV's power depends only on its own destination and the relay power only
on the total offloaded payload.  ``PowerPricer`` caches those per-component
minima so enumerating access patterns costs one bisection per distinct
component rather than one per pattern.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Iterator, Literal, Sequence

from drmec.cvar import build_loss_lower, build_loss_relay, gain_moments, min_feasible_power
from drmec.errors import CapacityError, DomainError, InfeasibleError
from drmec.model import (
    AccessVector,
    PowerAllocation,
    PowerBreakdown,
    ScenarioConfig,
    check_access,
    destination,
    nominal_min_power,
    offloaded_bits,
    total_power,
)

log = logging.getLogger(__name__)

Method = Literal["cvar", "nonrobust"]
METHODS = ("cvar", "nonrobust")
ENUMERATION_LIMIT = 15


@dataclass(frozen=True)
class Solution:
    x: AccessVector
    p: PowerAllocation
    breakdown: PowerBreakdown
    iterations: int
    trace: tuple[float, ...]
    method: str
    solver: str = "alternating"

    @property
    def total_w(self) -> float:
        return self.breakdown.total_w


@dataclass
class PowerPricer:
    """Memoised per-component minimum powers for one scenario and method."""

    cfg: ScenarioConfig
    method: str
    power_upper_bound: float = 1e3
    _lower: dict = field(default_factory=dict, repr=False)
    _upper: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.method not in METHODS:
            raise DomainError(f"method must be one of {METHODS}, got {self.method!r}")

    def lower(self, i: int, x_i: int) -> float:
        key = (i, x_i)
        if key not in self._lower:
            self._lower[key] = self._price_lower(i, x_i)
        return self._lower[key]

    def upper(self, payload_bits: float) -> float:
        if payload_bits not in self._upper:
            self._upper[payload_bits] = self._price_upper(payload_bits)
        return self._upper[payload_bits]

    def _price_lower(self, i: int, x_i: int) -> float:
        cfg = self.cfg
        u = cfg.lower[i]
        dest = destination(x_i)
        name = f"lower[{i}]->{dest}"
        if self.method == "cvar":
            return min_feasible_power(
                lambda p: build_loss_lower(u, p, dest, cfg.noise_var_w),
                gain_moments(u),
                cfg.alpha_lower,
                self.power_upper_bound,
                constraint=name,
            )
        p = nominal_min_power(
            u.bandwidth_hz, u.pathloss(dest), u.gain_mean, cfg.noise_var_w, u.data_len_bits, u.delay_budget_s
        )
        return self._bounded(p, name)

    def _price_upper(self, payload_bits: float) -> float:
        cfg = self.cfg
        up = cfg.upper
        if self.method == "cvar":
            return min_feasible_power(
                lambda p: build_loss_relay(up, payload_bits, p, cfg.noise_var_w),
                gain_moments(up),
                cfg.alpha_upper,
                self.power_upper_bound,
                constraint="upper",
            )
        p = nominal_min_power(
            up.bandwidth_hz, up.pathloss_to_bs, up.gain_mean, cfg.noise_var_w, payload_bits, up.delay_budget_s
        )
        return self._bounded(p, "upper")

    def _bounded(self, p: float, name: str) -> float:
        if p > self.power_upper_bound:
            raise InfeasibleError(
                f"{name}: needs {p:g} W, above the {self.power_upper_bound:g} W bound", constraint=name
            )
        return p

    def allocation(self, x: AccessVector) -> PowerAllocation:
        return PowerAllocation(
            p_lower_w=tuple(self.lower(i, xi) for i, xi in enumerate(x)),
            p_upper_w=self.upper(offloaded_bits(self.cfg, x)),
        )


def power_subproblem(
    cfg: ScenarioConfig, x: Sequence[int], method: str, *, pricer: PowerPricer | None = None
) -> PowerAllocation:
    """Minimum powers for a fixed access vector.

    Every constraint binds exactly one power and the objective is
    increasing in each, so the joint problem splits into independent
    one-dimensional searches.
    """
    x = check_access(cfg, x)
    pricer = pricer or PowerPricer(cfg, method)
    return pricer.allocation(x)


def _patterns(n: int, m: int) -> Iterator[AccessVector]:
    for k in range(m + 1):
        for idx in itertools.combinations(range(n), k):
            x = [0] * n
            for i in idx:
                x[i] = 1
            yield tuple(x)


def _rank(total: float, x: AccessVector) -> tuple:
    # ties: fewer offloads, then lexicographically smallest
    return (total, sum(x), x)


def _evaluate(cfg, x, pricer, p_context, pricing):
    """Objective of ``x``, or None when ``x`` has no feasible powers."""
    if pricing == "fixed":
        return total_power(cfg, x, p_context).total_w
    try:
        return total_power(cfg, x, pricer.allocation(x)).total_w
    except InfeasibleError:
        return None


def _enumerate(cfg, pricer, p_context, pricing) -> AccessVector:
    best = None
    for x in _patterns(cfg.n_lower, cfg.max_offload):
        total = _evaluate(cfg, x, pricer, p_context, pricing)
        if total is None:
            continue
        rank = _rank(total, x)
        if best is None or rank < best:
            best = rank
    if best is None:
        raise InfeasibleError("no access pattern admits feasible powers", constraint="access")
    return best[2]


def _neighbours(x: AccessVector, m: int) -> Iterator[AccessVector]:
    n = len(x)
    ones = sum(x)
    for i in range(n):
        if x[i] or ones < m:
            y = list(x)
            y[i] ^= 1
            yield tuple(y)
    for i in range(n):
        if not x[i]:
            continue
        for j in range(n):
            if x[j]:
                continue
            y = list(x)
            y[i], y[j] = 0, 1
            yield tuple(y)


def _local_search(cfg, pricer, p_context, pricing, start: AccessVector) -> AccessVector:
    current = start
    current_total = _evaluate(cfg, current, pricer, p_context, pricing)
    if current_total is None:
        raise InfeasibleError("local search start has no feasible powers", constraint="access")
    current_rank = _rank(current_total, current)
    while True:
        best = current_rank
        for y in _neighbours(current, cfg.max_offload):
            total = _evaluate(cfg, y, pricer, p_context, pricing)
            if total is not None and _rank(total, y) < best:
                best = _rank(total, y)
        if best == current_rank:
            return current
        current_rank = best
        current = best[2]


def _greedy_start(cfg: ScenarioConfig) -> AccessVector:
    saving = [
        (u.comp_coeff_w_per_cycle - cfg.upper.comp_coeff_w_per_cycle) * u.task_cycles for u in cfg.lower
    ]
    order = sorted(range(cfg.n_lower), key=lambda i: (-saving[i], i))
    chosen = [i for i in order[: cfg.max_offload] if saving[i] > 0]
    return tuple(1 if i in chosen else 0 for i in range(cfg.n_lower))


def access_subproblem(
    cfg: ScenarioConfig,
    p_context: PowerAllocation | None,
    method: str,
    *,
    pricing: str = "reprice",
    enum_limit: int = ENUMERATION_LIMIT,
    x_start: Sequence[int] | None = None,
    pricer: PowerPricer | None = None,
) -> AccessVector:
    """Choose the access vector under the cardinality cap.

    With ``pricing="reprice"`` each candidate is charged the minimum powers
    it actually needs.  ``pricing="fixed"`` keeps ``p_context`` while
    choosing ``x``, so only computation power varies.  Up to
    ``enum_limit`` lower UAVs the search is exhaustive; beyond that it is a
    best-improvement local search over bit flips and swaps.
    """
    if pricing not in ("reprice", "fixed"):
        raise DomainError(f"pricing must be 'reprice' or 'fixed', got {pricing!r}")
    if pricing == "fixed" and p_context is None:
        raise DomainError("fixed pricing needs a power context")
    pricer = pricer or PowerPricer(cfg, method)
    if cfg.n_lower <= enum_limit:
        return _enumerate(cfg, pricer, p_context, pricing)
    start = check_access(cfg, x_start) if x_start is not None else _greedy_start(cfg)
    if _evaluate(cfg, start, pricer, p_context, pricing) is None:
        start = tuple([0] * cfg.n_lower)
    return _local_search(cfg, pricer, p_context, pricing, start)


def _solution(cfg, x, p, iterations, trace, method, solver) -> Solution:
    return Solution(
        x=x,
        p=p,
        breakdown=total_power(cfg, x, p),
        iterations=iterations,
        trace=tuple(trace),
        method=method,
        solver=solver,
    )


def alternate(
    cfg: ScenarioConfig,
    method: str = "cvar",
    max_iters: int = 50,
    tol_w: float = 1e-6,
    *,
    pricing: str = "reprice",
    enum_limit: int = ENUMERATION_LIMIT,
    power_upper_bound: float = 1e3,
) -> Solution:
    """Alternate between the access and power subproblems until they settle.

    Starts from the all-local pattern.  Stops when the objective improves
    by less than ``tol_w`` or an access pattern repeats, and returns the
    best iterate; ``trace`` holds the best objective after each step.
    """
    if max_iters < 1:
        raise DomainError("max_iters must be >= 1")
    if tol_w <= 0:
        raise DomainError("tol_w must be > 0")
    pricer = PowerPricer(cfg, method, power_upper_bound)
    x = tuple([0] * cfg.n_lower)
    try:
        p = pricer.allocation(x)
        best_total = total_power(cfg, x, p).total_w
        best = (x, p)
        trace = [best_total]
    except InfeasibleError:
        if pricing == "fixed":
            raise
        p, best, best_total, trace = None, None, float("inf"), []
    seen = {x}
    iterations = 0
    for iterations in range(1, max_iters + 1):
        x = access_subproblem(
            cfg, p, method, pricing=pricing, enum_limit=enum_limit, x_start=x, pricer=pricer
        )
        p = pricer.allocation(x)
        total = total_power(cfg, x, p).total_w
        improvement = best_total - total
        if total < best_total:
            best_total, best = total, (x, p)
        trace.append(best_total)
        log.debug("iteration %d: x=%s total=%.12g W", iterations, x, total)
        if x in seen or improvement < tol_w:
            break
        seen.add(x)
    if best is None:
        raise InfeasibleError("no feasible iterate found", constraint="access")
    return _solution(cfg, best[0], best[1], iterations, trace, method, "alternating")


def exhaustive_oracle(cfg: ScenarioConfig, method: str = "cvar", *, power_upper_bound: float = 1e3) -> Solution:
    """Global optimum by enumerating every admissible access vector."""
    if cfg.n_lower > ENUMERATION_LIMIT:
        raise CapacityError(f"exhaustive enumeration is capped at N={ENUMERATION_LIMIT}, got N={cfg.n_lower}")
    pricer = PowerPricer(cfg, method, power_upper_bound)
    x = _enumerate(cfg, pricer, None, "reprice")
    p = pricer.allocation(x)
    return _solution(cfg, x, p, 1, [total_power(cfg, x, p).total_w], method, "enumeration")
