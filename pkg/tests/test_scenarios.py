import math

import pytest
from hypothesis import given, strategies as st

from ccwsim.errors import ConfigurationError
from ccwsim.scenarios import (
    CATALOG,
    ExposureState,
    ScenarioSpec,
    get_scenario,
    hazard,
    load_scenario,
    parse_scenario_text,
    reachable_states,
)

from oracles import OUTCOME_EQUATIONS


@pytest.mark.parametrize(
    "name, c, state, expected",
    [
        ("base", 0, ExposureState(0, 0, 0, 0), 0.05),
        ("base", 1, ExposureState(1, 3, 1, 2), 0.42),
        ("C", 0, ExposureState(1, 1, 0, 0), 0.05),
        ("C", 0, ExposureState(1, 2, 1, 1), 0.15),
        ("E", 1, ExposureState(1, 2, 1, 1), 0.25),
    ],
)
def test_hazard_examples(name, c, state, expected):
    assert hazard(CATALOG[name], c, state) == pytest.approx(expected, abs=1e-12)


def test_reachable_state_count():
    states = list(reachable_states(3))
    # x=0 once per t, plus t+1 exposed states
    assert len(states) == 2 * (2 + 3 + 4)
    assert len(states) <= 96


@pytest.mark.parametrize("name", list(CATALOG))
def test_catalog_matches_table1_on_every_reachable_state(name):
    spec = CATALOG[name]
    for c, s in reachable_states(3):
        assert hazard(spec, c, s) == pytest.approx(OUTCOME_EQUATIONS[name](c, s.x, s.cum_x, s.prev_x, s.t), abs=1e-12)


def test_scenario_A_ignores_exposure():
    spec = CATALOG["A"]
    for c in (0, 1):
        values = {round(hazard(spec, cc, s), 12) for cc, s in reachable_states() if cc == c}
        assert len(values) == 1


def test_scenario_B_depends_on_current_exposure_only():
    spec = CATALOG["B"]
    seen = {}
    for c, s in reachable_states():
        seen.setdefault((c, s.x), set()).add(round(hazard(spec, c, s), 12))
    assert all(len(v) == 1 for v in seen.values())


@pytest.mark.parametrize("name", list(CATALOG))
def test_catalog_hazards_in_unit_interval_and_nonnegative(name):
    spec = CATALOG[name]
    assert all(v >= 0 for v in spec.coefficients().values())
    spec.validate(3)


@pytest.mark.parametrize("name", list(CATALOG))
def test_monotone_in_each_input(name):
    spec = CATALOG[name]
    f = spec.hazard_array
    for t in range(3):
        for x, cum, prev in [(0, 0, 0), (1, 1, 0), (1, 2, 1), (1, 3, 1)]:
            if cum > t + 1:
                continue
            assert f(1, x, cum, prev, t) >= f(0, x, cum, prev, t)
    # raising one input at a time, holding the others fixed
    for c in (0, 1):
        assert f(c, 1, 0, 0, 1) >= f(c, 0, 0, 0, 1)
        assert f(c, 1, 2, 0, 2) >= f(c, 1, 1, 0, 2)
        assert f(c, 1, 2, 1, 2) >= f(c, 1, 2, 0, 2)


@given(start=st.one_of(st.none(), st.integers(0, 5)), t=st.integers(0, 5))
def test_state_from_start_is_consistent(start, t):
    s = ExposureState.from_start(start, t)
    assert s.cum_x >= s.x
    assert s.cum_x <= t + 1
    assert s.prev_x <= min(1, s.cum_x)


@given(start=st.one_of(st.none(), st.integers(0, 3)))
def test_exposure_is_persistent(start):
    xs = [ExposureState.from_start(start, t).x for t in range(4)]
    assert all(a <= b for a, b in zip(xs, xs[1:]))


@pytest.mark.parametrize("args", [(0, 1, 0, 0), (1, 0, 0, 0), (1, 2, 0, 1), (2, 0, 0, 0), (1, 1, 1, 1)])
def test_inconsistent_states_rejected(args):
    with pytest.raises(ConfigurationError):
        ExposureState(*args)


def test_out_of_range_hazard_is_an_error_not_a_clamp():
    spec = ScenarioSpec("hot", 0.6, beta_c=0.3, beta_x=0.2)
    with pytest.raises(ConfigurationError, match=r"beta_x.*|c=1, x=1"):
        spec.validate()
    with pytest.raises(ConfigurationError, match="c=1, x=1"):
        spec.hazard_array([0, 1], [1, 1], [1, 1], [0, 0], 0)


def test_nonfinite_coefficient_rejected():
    with pytest.raises(ConfigurationError):
        ScenarioSpec("bad", math.nan)


def test_unknown_scenario():
    with pytest.raises(ConfigurationError, match="unknown scenario"):
        get_scenario("Z")


def test_parse_scenario_text(tmp_path):
    text = "# custom\nname = half\nintercept=0.02\nbeta_c = 0.1\nbeta_x = 0.05\nonset_period=1\n"
    spec = parse_scenario_text(text)
    assert spec == ScenarioSpec("half", 0.02, beta_c=0.1, beta_x=0.05, onset_period=1)
    path = tmp_path / "s.txt"
    path.write_text("name=base\nintercept=0.05\nbeta_c=0.1\nbeta_x=0.1\nbeta_cumx=0.04\nbeta_prevx=0.05\n")
    assert load_scenario(path) == CATALOG["base"]


@pytest.mark.parametrize(
    "text, msg",
    [
        ("beta_q=0.1", "unknown key"),
        ("intercept", "key=value"),
        ("intercept=abc", "bad value"),
        ("intercept=0.1\nintercept=0.2", "duplicate"),
        ("intercept=0.9\nbeta_c=0.5", "outside"),
    ],
)
def test_parse_scenario_errors(text, msg):
    with pytest.raises(ConfigurationError, match=msg):
        parse_scenario_text(text)
