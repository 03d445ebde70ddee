"""Deterministic two-layer UAV system model.

Lower-layer UAVs either compute locally and send results to the base
station (``x_i = 0``) or ship raw data to the single upper-layer UAV
(``x_i = 1``), which computes and relays everything to the base station.
All powers are in watts, data in bits, work in CPU cycles, time in seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Literal, Sequence

import numpy as np

from drmec.errors import DomainError, InfeasibleError, ShapeError

Destination = Literal["upper", "bs"]
AccessVector = tuple[int, ...]


def _finite(name: str, value: float) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise DomainError(f"{name} must be a number, got {value!r}") from None
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value}")
    return value


def _nonneg(name: str, value: float) -> float:
    value = _finite(name, value)
    if value < 0:
        raise DomainError(f"{name} must be >= 0, got {value}")
    return value


def _positive(name: str, value: float) -> float:
    value = _finite(name, value)
    if value <= 0:
        raise DomainError(f"{name} must be > 0, got {value}")
    return value


@dataclass(frozen=True)
class LowerUavParams:
    data_len_bits: float
    task_cycles: float
    bandwidth_hz: float
    comp_coeff_w_per_cycle: float
    gain_nominal: float
    gain_err_mean: float
    gain_err_var: float
    pathloss_to_upper: float
    pathloss_to_bs: float
    delay_budget_s: float

    def __post_init__(self):
        for name in ("data_len_bits", "task_cycles", "comp_coeff_w_per_cycle", "gain_err_var"):
            object.__setattr__(self, name, _nonneg(name, getattr(self, name)))
        for name in ("bandwidth_hz", "pathloss_to_upper", "pathloss_to_bs", "delay_budget_s"):
            object.__setattr__(self, name, _positive(name, getattr(self, name)))
        for name in ("gain_nominal", "gain_err_mean"):
            object.__setattr__(self, name, _finite(name, getattr(self, name)))

    @property
    def gain_mean(self) -> float:
        """Mean of the true gain magnitude, nominal plus error mean."""
        return self.gain_nominal + self.gain_err_mean

    def pathloss(self, dest: Destination) -> float:
        if dest == "upper":
            return self.pathloss_to_upper
        if dest == "bs":
            return self.pathloss_to_bs
        raise DomainError(f"dest must be 'upper' or 'bs', got {dest!r}")


@dataclass(frozen=True)
class UpperUavParams:
    bandwidth_hz: float
    comp_coeff_w_per_cycle: float
    gain_nominal: float
    gain_err_mean: float
    gain_err_var: float
    pathloss_to_bs: float
    delay_budget_s: float

    def __post_init__(self):
        for name in ("comp_coeff_w_per_cycle", "gain_err_var"):
            object.__setattr__(self, name, _nonneg(name, getattr(self, name)))
        for name in ("bandwidth_hz", "pathloss_to_bs", "delay_budget_s"):
            object.__setattr__(self, name, _positive(name, getattr(self, name)))
        for name in ("gain_nominal", "gain_err_mean"):
            object.__setattr__(self, name, _finite(name, getattr(self, name)))

    @property
    def gain_mean(self) -> float:
        return self.gain_nominal + self.gain_err_mean


@dataclass(frozen=True)
class ScenarioConfig:
    """A complete problem instance."""

    lower: tuple[LowerUavParams, ...]
    upper: UpperUavParams
    max_offload: int
    noise_var_w: float
    alpha_lower: float
    alpha_upper: float

    def __post_init__(self):
        object.__setattr__(self, "lower", tuple(self.lower))
        if not self.lower:
            raise DomainError("lower must contain at least one UAV")
        if int(self.max_offload) != self.max_offload:
            raise DomainError(f"max_offload must be an integer, got {self.max_offload!r}")
        object.__setattr__(self, "max_offload", int(self.max_offload))
        if not 0 <= self.max_offload <= len(self.lower):
            raise DomainError(
                f"max_offload must satisfy 0 <= m <= N={len(self.lower)} (offload capacity), got {self.max_offload}"
            )
        object.__setattr__(self, "noise_var_w", _positive("noise_var_w", self.noise_var_w))
        for name in ("alpha_lower", "alpha_upper"):
            value = _finite(name, getattr(self, name))
            if not 0 < value < 1:
                raise DomainError(f"{name} must lie in (0, 1), got {value}")
            object.__setattr__(self, name, value)

    @property
    def n_lower(self) -> int:
        return len(self.lower)

    def with_delay_budget(self, delay_budget_s: float) -> "ScenarioConfig":
        """Copy with every lower and upper delay budget set to one value."""
        return replace(
            self,
            lower=tuple(replace(u, delay_budget_s=delay_budget_s) for u in self.lower),
            upper=replace(self.upper, delay_budget_s=delay_budget_s),
        )


@dataclass(frozen=True)
class PowerAllocation:
    p_lower_w: tuple[float, ...]
    p_upper_w: float

    def __post_init__(self):
        object.__setattr__(
            self, "p_lower_w", tuple(_nonneg(f"p_lower_w[{i}]", p) for i, p in enumerate(self.p_lower_w))
        )
        object.__setattr__(self, "p_upper_w", _nonneg("p_upper_w", self.p_upper_w))


@dataclass(frozen=True)
class PowerBreakdown:
    tx_lower_w: float
    tx_upper_w: float
    comp_lower_w: float
    comp_upper_w: float
    total_w: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(
            self, "total_w", self.tx_lower_w + self.tx_upper_w + self.comp_lower_w + self.comp_upper_w
        )

    @property
    def tx_w(self) -> float:
        return self.tx_lower_w + self.tx_upper_w


def destination(x_i: int) -> Destination:
    return "upper" if x_i else "bs"


def check_access(cfg: ScenarioConfig, x: Sequence[int]) -> AccessVector:
    """Validate ``x`` against the binary and offload-cap rules and return it as a tuple of ints."""
    if len(x) != cfg.n_lower:
        raise ShapeError(f"access vector has length {len(x)}, scenario has N={cfg.n_lower}")
    out = []
    for i, v in enumerate(x):
        if v not in (0, 1):
            raise DomainError(f"x[{i}] must be 0 or 1, got {v!r}")
        out.append(int(v))
    if sum(out) > cfg.max_offload:
        raise DomainError(f"access vector offloads {sum(out)} UAVs, max_offload is {cfg.max_offload}")
    return tuple(out)


def offloaded_bits(cfg: ScenarioConfig, x: Sequence[int]) -> float:
    return float(sum(u.data_len_bits for u, xi in zip(cfg.lower, x) if xi))


def transmission_rate(bandwidth_hz, pathloss, power_w, gain_abs, noise_var_w):
    """Shannon rate ``B log2(1 + gamma p |g|^2 / sigma^2)`` in bit/s.

    ``gain_abs`` may be an array, in which case an array of rates is
    returned.
    """
    bandwidth_hz = _positive("bandwidth_hz", bandwidth_hz)
    pathloss = _positive("pathloss", pathloss)
    power_w = _nonneg("power_w", power_w)
    noise_var_w = _positive("noise_var_w", noise_var_w)
    gain = np.asarray(gain_abs, dtype=float)
    if not np.all(np.isfinite(gain)) or np.any(gain < 0):
        raise DomainError("gain_abs must be finite and >= 0")
    snr = pathloss * power_w * gain**2 / noise_var_w
    rate = bandwidth_hz * np.log2(1.0 + snr)
    return float(rate) if rate.ndim == 0 else rate


def _delay(bits: float, rate: float, what: str) -> float:
    if bits == 0:
        return 0.0
    if rate <= 0:
        raise InfeasibleError(f"{what}: {bits:g} bits to send at zero rate", constraint=what)
    return bits / rate


def transmission_delay_lower(
    params: LowerUavParams, power_w: float, gain_abs: float, dest: Destination, noise_var_w: float
) -> float:
    rate = transmission_rate(params.bandwidth_hz, params.pathloss(dest), power_w, gain_abs, noise_var_w)
    return _delay(params.data_len_bits, rate, "lower")


def transmission_delay_upper(cfg: ScenarioConfig, x: Sequence[int], p_upper_w: float, gain_abs: float) -> float:
    x = check_access(cfg, x)
    up = cfg.upper
    rate = transmission_rate(up.bandwidth_hz, up.pathloss_to_bs, p_upper_w, gain_abs, cfg.noise_var_w)
    return _delay(offloaded_bits(cfg, x), rate, "upper")


def total_power(cfg: ScenarioConfig, x: Sequence[int], p: PowerAllocation) -> PowerBreakdown:
    x = check_access(cfg, x)
    if len(p.p_lower_w) != cfg.n_lower:
        raise ShapeError(f"power allocation has {len(p.p_lower_w)} lower entries, scenario has N={cfg.n_lower}")
    comp_lower = sum(u.comp_coeff_w_per_cycle * u.task_cycles for u, xi in zip(cfg.lower, x) if not xi)
    comp_upper = cfg.upper.comp_coeff_w_per_cycle * sum(u.task_cycles for u, xi in zip(cfg.lower, x) if xi)
    return PowerBreakdown(
        tx_lower_w=float(sum(p.p_lower_w)),
        tx_upper_w=p.p_upper_w,
        comp_lower_w=float(comp_lower),
        comp_upper_w=float(comp_upper),
    )


def nominal_min_power(bandwidth_hz, pathloss, gain_nominal_plus_mean, noise_var_w, data_len_bits, delay_budget_s):
    """Least power meeting the delay budget at the nominal gain, exact Shannon rate.

    Inverts ``L / (B log2(1 + gamma p g^2 / sigma^2)) <= t_max``.
    """
    bandwidth_hz = _positive("bandwidth_hz", bandwidth_hz)
    pathloss = _positive("pathloss", pathloss)
    noise_var_w = _positive("noise_var_w", noise_var_w)
    data_len_bits = _nonneg("data_len_bits", data_len_bits)
    delay_budget_s = _positive("delay_budget_s", delay_budget_s)
    g = _finite("gain_nominal_plus_mean", gain_nominal_plus_mean)
    if data_len_bits == 0:
        return 0.0
    if g == 0:
        raise InfeasibleError("zero nominal gain cannot carry a positive payload")
    spectral = data_len_bits / (bandwidth_hz * delay_budget_s)
    return noise_var_w * math.expm1(spectral * math.log(2.0)) / (pathloss * g * g)
