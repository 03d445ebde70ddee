import textwrap

import pytest

from drmec.scenario import ScenarioError, dump_scenario, load_scenario, parse_scenario

GOOD = textwrap.dedent(
    """\
    noise_var_w: 1e-12
    max_offload: 1
    alpha_lower: 0.9
    alpha_upper: 0.95
    upper:
      bandwidth_hz: 1.0e+7
      comp_coeff_w_per_cycle: 1.0e-6
      gain_nominal: 5.0
      gain_err_mean: 0.0
      gain_err_var: 0.01
      pathloss_to_bs: 1.0e-9
      delay_budget_s: 0.1
    lower_defaults:
      bandwidth_hz: 1.0e+7
      comp_coeff_w_per_cycle: 5.0e-6
      gain_nominal: 5.0
      gain_err_mean: 0.0
      gain_err_var: 0.01
      pathloss_to_upper: 1.0e-8
      pathloss_to_bs: 1.0e-9
      delay_budget_s: 0.1
    lower:
      - {data_len_bits: 40000, task_cycles: 40000}
      - {data_len_bits: 60000, task_cycles: 100000, bandwidth_hz: 2.0e+7}
    """
)


def test_bundled_defaults(defaults):
    assert defaults.n_lower == 6 and defaults.max_offload == 3
    assert defaults.alpha_lower == defaults.alpha_upper == 0.95
    assert defaults.noise_var_w == 1e-12
    assert {u.comp_coeff_w_per_cycle for u in defaults.lower} == {5e-6}
    assert defaults.upper.comp_coeff_w_per_cycle == 1e-6
    assert {u.gain_nominal for u in defaults.lower} == {5.0}
    assert {u.gain_err_var for u in defaults.lower} == {0.01}
    assert [u.data_len_bits for u in defaults.lower] == [40e3, 44e3, 48e3, 52e3, 56e3, 60e3]
    assert {u.pathloss_to_bs for u in defaults.lower} == {1e-9}
    assert {u.pathloss_to_upper for u in defaults.lower} == {1e-8}


def test_parse_merges_defaults_and_reads_bare_exponents():
    cfg = parse_scenario(GOOD)
    assert cfg.noise_var_w == 1e-12
    assert cfg.lower[0].bandwidth_hz == 1e7 and cfg.lower[1].bandwidth_hz == 2e7
    assert cfg.alpha_lower == 0.9


def test_offload_cap_above_fleet_is_rejected_with_line():
    text = GOOD.replace("max_offload: 1", "max_offload: 3")
    with pytest.raises(ScenarioError, match="offload capacity") as info:
        parse_scenario(text, "s.yaml")
    assert info.value.line == 2
    assert str(info.value).startswith("s.yaml:2:")


def test_negative_bandwidth_is_rejected_with_line():
    text = GOOD.replace("bandwidth_hz: 2.0e+7", "bandwidth_hz: -2.0e+7")
    with pytest.raises(ScenarioError, match="bandwidth_hz") as info:
        parse_scenario(text)
    assert info.value.line == 24


@pytest.mark.parametrize(
    "old,new,match",
    [
        ("gain_nominal: 5.0\n  gain_err_mean: 0.0\n  gain_err_var: 0.01\n  pathloss_to_bs", "gain_nominal: 5.0\n  gain_err_mean: 0.0\n  gain_err_varr: 0.01\n  pathloss_to_bs", "unknown field"),
        ("alpha_upper: 0.95", "alpha_upper: high", "expected a number"),
        ("alpha_upper: 0.95", "alpha_upper: 1.5", "alpha_upper"),
        ("noise_var_w: 1e-12\n", "", "missing required field 'noise_var_w'"),
        ("lower:\n", "lowr:\n", "unknown top-level field"),
    ],
)
def test_invalid_inputs(old, new, match):
    assert old in GOOD
    with pytest.raises(ScenarioError, match=match):
        parse_scenario(GOOD.replace(old, new, 1))


def test_parse_errors_carry_line():
    with pytest.raises(ScenarioError, match="parse error") as info:
        parse_scenario("a: 1\nb: [1, 2\nc: 3\n")
    assert info.value.line is not None
    with pytest.raises(ScenarioError, match="empty"):
        parse_scenario("")
    with pytest.raises(ScenarioError, match="missing required section"):
        parse_scenario("max_offload: 1\n")


def test_missing_file():
    with pytest.raises(ScenarioError, match="cannot read"):
        load_scenario("/nonexistent/scenario.yaml")


def test_dump_roundtrip(tmp_path, defaults):
    path = tmp_path / "s.yaml"
    dump_scenario(defaults, path)
    assert load_scenario(path) == defaults
