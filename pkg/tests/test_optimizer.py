import itertools
import math

import numpy as np
import pytest
from scipy.optimize import brentq

from conftest import lower_uav, make_cfg, random_cfg, upper_uav
from drmec.cvar import build_loss_lower, build_loss_upper, gain_moments, wc_cvar_value
from drmec.errors import CapacityError, DomainError, InfeasibleError
from drmec.model import total_power
from drmec.optimizer import (
    PowerPricer,
    access_subproblem,
    alternate,
    exhaustive_oracle,
    power_subproblem,
)


def closed_form_power(bits, bw, gamma, t_max, mu, var, alpha, noise=1e-12):
    kappa = math.sqrt(alpha / (1 - alpha))
    return bits * noise / (bw * gamma * t_max * (mu - math.sqrt(var) * kappa) ** 2)


def test_power_all_local_has_idle_relay(defaults):
    p = power_subproblem(defaults, (0,) * 6, "cvar")
    assert p.p_upper_w == 0.0
    assert all(v > 0 for v in p.p_lower_w)


def test_power_zero_payload_single_uav():
    cfg = make_cfg([lower_uav(data_len_bits=0.0)])
    for x in [(0,), (1,)]:
        for method in ("cvar", "nonrobust"):
            p = power_subproblem(cfg, x, method)
            assert p.p_lower_w == (0.0,) and p.p_upper_w == 0.0


def test_power_componentwise_reference(defaults):
    x = (0, 0, 0, 1, 1, 1)
    p = power_subproblem(defaults, x, "cvar")
    for u, xi, got in zip(defaults.lower, x, p.p_lower_w):
        gamma = u.pathloss_to_upper if xi else u.pathloss_to_bs
        want = closed_form_power(u.data_len_bits, u.bandwidth_hz, gamma, u.delay_budget_s, 5.0, 0.01, 0.95)
        assert got == pytest.approx(want, rel=1e-9)
    up = defaults.upper
    want = closed_form_power(168e3, up.bandwidth_hz, up.pathloss_to_bs, up.delay_budget_s, 5.0, 0.01, 0.95)
    assert p.p_upper_w == pytest.approx(want, rel=1e-9)


def test_power_nonrobust_matches_rate_root(defaults):
    p = power_subproblem(defaults, (0, 0, 0, 0, 0, 1), "nonrobust")
    u = defaults.lower[5]

    def slack(q):
        return u.bandwidth_hz * math.log2(1 + u.pathloss_to_upper * q * 25.0 / 1e-12) * u.delay_budget_s - u.data_len_bits

    assert p.p_lower_w[5] == pytest.approx(brentq(slack, 1e-15, 1.0, xtol=1e-22, rtol=1e-14), rel=1e-10)


def test_cvar_solution_is_feasible(defaults):
    sol = alternate(defaults, "cvar")
    for i, (u, xi) in enumerate(zip(defaults.lower, sol.x)):
        loss = build_loss_lower(u, sol.p.p_lower_w[i], "upper" if xi else "bs", defaults.noise_var_w)
        assert wc_cvar_value(loss, gain_moments(u), defaults.alpha_lower) <= 1e-8 * loss.theta0
    loss = build_loss_upper(defaults, sol.x, sol.p.p_upper_w)
    assert wc_cvar_value(loss, gain_moments(defaults.upper), defaults.alpha_upper) <= 1e-8 * max(loss.theta0, 1e-300)


def test_access_m_zero_forces_local():
    cfg = make_cfg([lower_uav(), lower_uav()], m=0)
    assert access_subproblem(cfg, None, "cvar") == (0, 0)


def test_access_single_uav_two_way_comparison():
    # offloading saves (5e-6 - 1e-6) * 7e4 = 0.28 W of computation
    cfg = make_cfg([lower_uav()], m=1)
    costs = {x: total_power(cfg, x, power_subproblem(cfg, x, "cvar")).total_w for x in [(0,), (1,)]}
    assert access_subproblem(cfg, None, "cvar") == min(costs, key=costs.get) == (1,)
    # expensive relay computation flips the choice
    cfg = make_cfg([lower_uav()], upper_uav(comp_coeff_w_per_cycle=1e-5), m=1)
    assert access_subproblem(cfg, None, "cvar") == (0,)


def test_access_enumerates_all_42_patterns():
    cfg = random_cfg(np.random.default_rng(3), n=6)
    cfg = make_cfg(cfg.lower, cfg.upper, m=3)
    patterns = [x for x in itertools.product((0, 1), repeat=6) if sum(x) <= 3]
    assert len(patterns) == 42
    totals = {}
    for x in patterns:
        try:
            totals[x] = total_power(cfg, x, power_subproblem(cfg, x, "cvar")).total_w
        except InfeasibleError:
            pass
    best = min(totals, key=lambda x: (totals[x], sum(x), x))
    assert access_subproblem(cfg, None, "cvar") == best


def test_tie_break_prefers_lexicographically_smallest():
    cfg = make_cfg([lower_uav(), lower_uav()], m=1)
    assert exhaustive_oracle(cfg).x == (0, 1)


def test_alternate_single_uav_no_offload():
    cfg = make_cfg([lower_uav()], m=0)
    sol = alternate(cfg, "cvar")
    assert sol.x == (0,) and sol.iterations == 1
    assert sol.p == power_subproblem(cfg, (0,), "cvar")


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("method", ["cvar", "nonrobust"])
def test_alternate_consistency(seed, method):
    cfg = random_cfg(np.random.default_rng(seed))
    try:
        sol = alternate(cfg, method)
    except InfeasibleError:
        pytest.skip("infeasible draw")
    assert sol.total_w == total_power(cfg, sol.x, sol.p).total_w
    assert all(b <= a for a, b in zip(sol.trace, sol.trace[1:]))
    assert sum(sol.x) <= cfg.max_offload
    oracle = exhaustive_oracle(cfg, method)
    assert oracle.total_w <= sol.total_w
    assert oracle.solver == "enumeration"


def test_exhaustive_m_zero_and_dominance():
    cfg = make_cfg([lower_uav(), lower_uav(task_cycles=9e4)], m=0)
    sol = exhaustive_oracle(cfg)
    assert sol.x == (0, 0) and sol.p == power_subproblem(cfg, (0, 0), "cvar")
    # offloading is strictly cheaper for everyone: free relay compute and a strong uplink
    cheap = make_cfg([lower_uav(), lower_uav(task_cycles=9e4)], upper_uav(comp_coeff_w_per_cycle=0.0))
    assert exhaustive_oracle(cheap).x == (1, 1)


def test_exhaustive_capacity():
    cfg = make_cfg([lower_uav()] * 16, m=2)
    with pytest.raises(CapacityError):
        exhaustive_oracle(cfg)


def test_local_search_beyond_enumeration_limit():
    cfg = random_cfg(np.random.default_rng(11), n=8)
    cfg = make_cfg(cfg.lower, cfg.upper, m=4)
    sol = alternate(cfg, "cvar", enum_limit=0)
    oracle = exhaustive_oracle(cfg, "cvar")
    assert sol.total_w >= oracle.total_w
    assert sol.total_w <= total_power(cfg, (0,) * 8, power_subproblem(cfg, (0,) * 8, "cvar")).total_w


def test_fixed_pricing_mode(defaults):
    sol = alternate(defaults, "cvar", pricing="fixed")
    assert sol.total_w == total_power(defaults, sol.x, sol.p).total_w
    with pytest.raises(DomainError):
        access_subproblem(defaults, None, "cvar", pricing="fixed")
    with pytest.raises(DomainError):
        access_subproblem(defaults, None, "cvar", pricing="sometimes")


def test_infeasible_instance_names_constraint():
    cfg = make_cfg([lower_uav(gain_err_var=10.0)], m=0)
    with pytest.raises(InfeasibleError) as info:
        alternate(cfg, "cvar")
    assert info.value.constraint is not None


def test_nonrobust_bound_applies():
    cfg = make_cfg([lower_uav(pathloss_to_bs=1e-25)], m=0)
    with pytest.raises(InfeasibleError):
        alternate(cfg, "nonrobust")


def test_argument_checks(defaults):
    with pytest.raises(DomainError):
        alternate(defaults, max_iters=0)
    with pytest.raises(DomainError):
        alternate(defaults, tol_w=0.0)
    with pytest.raises(DomainError):
        PowerPricer(defaults, "robustish")


def test_pricer_caches(defaults):
    pricer = PowerPricer(defaults, "cvar")
    a = pricer.lower(0, 1)
    assert pricer.lower(0, 1) is a
    assert pricer.upper(0.0) == 0.0
