"""Monte Carlo certification of the delay chance constraints.

Gain errors are drawn from moment-matched families and the constraint
event is checked per sample.  Streams are keyed by
``(seed, constraint index, distribution index)``, so every estimate is
reproducible on its own, independent of evaluation order.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from drmec.cvar import build_loss_lower, build_loss_upper
from drmec.errors import DomainError
from drmec.model import ScenarioConfig, destination, offloaded_bits, transmission_rate
from drmec.optimizer import Solution

KINDS = ("gaussian", "uniform", "two_point")
LOW_CONFIDENCE_SAMPLES = 1000


@dataclass(frozen=True)
class ErrorDistribution:
    kind: str
    mean: float
    variance: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not (math.isfinite(self.mean) and math.isfinite(self.variance)) or self.variance < 0:
            raise DomainError(f"invalid moments mean={self.mean}, variance={self.variance}")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        sd = math.sqrt(self.variance)
        if self.kind == "gaussian":
            return rng.normal(self.mean, sd, n)
        if self.kind == "uniform":
            half = math.sqrt(3.0) * sd
            return rng.uniform(self.mean - half, self.mean + half, n)
        signs = rng.integers(0, 2, n) * 2 - 1
        return self.mean + sd * signs


DistSpec = Union[str, ErrorDistribution]


@dataclass(frozen=True)
class ConstraintResult:
    constraint: str
    kind: str
    probability: float
    samples: int
    half_width: float
    alpha: float

    @property
    def passed(self) -> bool:
        return self.probability >= self.alpha - self.half_width


@dataclass(frozen=True)
class SatisfactionReport:
    """Per-constraint estimates.

    ``half_width`` is three binomial standard errors at the target
    probability; a constraint passes when its estimate is no lower than the
    target minus that margin.
    """

    per_constraint: tuple[ConstraintResult, ...]
    alpha_target: float
    low_confidence: bool = False

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.per_constraint)

    @property
    def min_probability(self) -> float:
        return min((r.probability for r in self.per_constraint), default=1.0)

    def rows(self) -> list[dict]:
        return [
            {
                "constraint": r.constraint,
                "kind": r.kind,
                "probability": r.probability,
                "samples": r.samples,
                "half_width": r.half_width,
                "alpha": r.alpha,
                "passed": r.passed,
            }
            for r in self.per_constraint
        ]


def sample_gain(dist: ErrorDistribution, nominal_gain: float, n: int, seed) -> np.ndarray:
    """``n`` draws of ``nominal_gain + error``; ``seed`` is an int or int sequence."""
    if n < 1:
        raise DomainError("n must be >= 1")
    return nominal_gain + dist.sample(np.random.default_rng(seed), n)


def _constraints(cfg: ScenarioConfig, sol: Solution):
    """Yield ``(index, name, nominal gain, err mean, err var, alpha)``."""
    for i, u in enumerate(cfg.lower):
        yield i, f"lower[{i}]", u.gain_nominal, u.gain_err_mean, u.gain_err_var, cfg.alpha_lower
    up = cfg.upper
    yield cfg.n_lower, "upper", up.gain_nominal, up.gain_err_mean, up.gain_err_var, cfg.alpha_upper


def _resolve(spec: DistSpec, mean: float, var: float) -> ErrorDistribution:
    if isinstance(spec, ErrorDistribution):
        return spec
    return ErrorDistribution(spec, mean, var)


def _estimate(cfg, sol, dists, n, seed, event) -> SatisfactionReport:
    if len(sol.x) != cfg.n_lower:
        raise DomainError(f"solution has {len(sol.x)} UAVs, scenario has {cfg.n_lower}")
    low = n < LOW_CONFIDENCE_SAMPLES
    if low:
        warnings.warn(f"{n} samples is below {LOW_CONFIDENCE_SAMPLES}; estimates are low-confidence", stacklevel=3)
    results = []
    for idx, name, g_nom, e_mean, e_var, alpha in _constraints(cfg, sol):
        for d_idx, spec in enumerate(dists):
            dist = _resolve(spec, e_mean, e_var)
            xi = sample_gain(dist, g_nom, n, [seed, idx, d_idx])
            ok = event(idx, xi)
            results.append(
                ConstraintResult(
                    constraint=name,
                    kind=dist.kind,
                    probability=float(np.count_nonzero(ok)) / n,
                    samples=n,
                    half_width=3.0 * math.sqrt(alpha * (1.0 - alpha) / n),
                    alpha=alpha,
                )
            )
    return SatisfactionReport(
        per_constraint=tuple(results),
        alpha_target=min(cfg.alpha_lower, cfg.alpha_upper),
        low_confidence=low,
    )


def empirical_satisfaction(
    cfg: ScenarioConfig, sol: Solution, dists: Sequence[DistSpec] = KINDS, n: int = 100_000, seed: int = 0
) -> SatisfactionReport:
    """Estimate ``P{loss(xi) <= 0}`` for every constraint and distribution.

    A string entry in ``dists`` names a family whose moments are taken from
    each gain's own error mean and variance; an :class:`ErrorDistribution`
    is used as given for every gain.
    """

    def event(idx, xi):
        if idx < cfg.n_lower:
            loss = build_loss_lower(cfg.lower[idx], sol.p.p_lower_w[idx], destination(sol.x[idx]), cfg.noise_var_w)
        else:
            loss = build_loss_upper(cfg, sol.x, sol.p.p_upper_w)
        return loss(xi) <= 0

    return _estimate(cfg, sol, dists, n, seed, event)


def shannon_delay_diagnostic(
    cfg: ScenarioConfig, sol: Solution, dists: Sequence[DistSpec] = KINDS, n: int = 100_000, seed: int = 0
) -> SatisfactionReport:
    """Same estimate with the exact Shannon delay ``L / r <= t_max`` as the event."""
    payload_upper = offloaded_bits(cfg, sol.x)

    def event(idx, xi):
        if idx < cfg.n_lower:
            u = cfg.lower[idx]
            bits, t_max = u.data_len_bits, u.delay_budget_s
            bw, gamma, p = u.bandwidth_hz, u.pathloss(destination(sol.x[idx])), sol.p.p_lower_w[idx]
        else:
            up = cfg.upper
            bits, t_max = payload_upper, up.delay_budget_s
            bw, gamma, p = up.bandwidth_hz, up.pathloss_to_bs, sol.p.p_upper_w
        if bits == 0:
            return np.ones(xi.shape, dtype=bool)
        rate = transmission_rate(bw, gamma, p, np.abs(xi), cfg.noise_var_w)
        # relative slack absorbs rounding when p sits exactly on the boundary
        return rate * t_max >= bits * (1.0 - 1e-12)

    return _estimate(cfg, sol, dists, n, seed, event)
