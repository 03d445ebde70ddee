import math

import numpy as np
import pytest

from drmec.model import LowerUavParams, ScenarioConfig, UpperUavParams
from drmec.scenario import load_scenario


def lower_uav(**kw) -> LowerUavParams:
    base = dict(
        data_len_bits=50e3,
        task_cycles=70e3,
        bandwidth_hz=1e7,
        comp_coeff_w_per_cycle=5e-6,
        gain_nominal=5.0,
        gain_err_mean=0.0,
        gain_err_var=0.01,
        pathloss_to_upper=1e-8,
        pathloss_to_bs=1e-9,
        delay_budget_s=0.1,
    )
    base.update(kw)
    return LowerUavParams(**base)


def upper_uav(**kw) -> UpperUavParams:
    base = dict(
        bandwidth_hz=1e7,
        comp_coeff_w_per_cycle=1e-6,
        gain_nominal=5.0,
        gain_err_mean=0.0,
        gain_err_var=0.01,
        pathloss_to_bs=1e-9,
        delay_budget_s=0.1,
    )
    base.update(kw)
    return UpperUavParams(**base)


def make_cfg(lower=None, upper=None, m=None, noise=1e-12, alpha=0.95) -> ScenarioConfig:
    lower = tuple(lower) if lower is not None else (lower_uav(),)
    return ScenarioConfig(
        lower=lower,
        upper=upper or upper_uav(),
        max_offload=len(lower) if m is None else m,
        noise_var_w=noise,
        alpha_lower=alpha,
        alpha_upper=alpha,
    )


def random_cfg(rng: np.random.Generator, n: int | None = None) -> ScenarioConfig:
    """Random instance whose access choice is not dictated by computation alone.

    Path losses are log-uniform over [1e-14, 1e-9] so transmission power is
    comparable to computation power.
    """
    n = n or int(rng.integers(1, 11))

    def loguni(lo, hi):
        return float(math.exp(rng.uniform(math.log(lo), math.log(hi))))

    lower = [
        lower_uav(
            data_len_bits=rng.uniform(40e3, 60e3),
            task_cycles=rng.uniform(40e3, 100e3),
            comp_coeff_w_per_cycle=loguni(1e-7, 1e-5),
            pathloss_to_upper=loguni(1e-14, 1e-9),
            pathloss_to_bs=loguni(1e-14, 1e-9),
            gain_err_var=rng.uniform(0.0, 0.05),
        )
        for _ in range(n)
    ]
    upper = upper_uav(comp_coeff_w_per_cycle=loguni(1e-7, 1e-5), pathloss_to_bs=loguni(1e-14, 1e-9))
    return make_cfg(lower, upper, m=int(rng.integers(0, n + 1)), alpha=float(rng.choice([0.9, 0.95, 0.99])))


@pytest.fixture(scope="session")
def defaults() -> ScenarioConfig:
    return load_scenario("paper_defaults")


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = next((m for name, m in sys.modules.items() if name.endswith("test_acceptance")), None)
    lines = getattr(mod, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines.items()):
        terminalreporter.write_line(line)
