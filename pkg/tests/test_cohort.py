import math

import numpy as np
import pytest

from ccwsim import streams
from ccwsim.cohort import (
    DEFAULT_TREATMENT,
    Cohort,
    Intervention,
    PersonPath,
    TreatmentModel,
    closed_form_risk,
    mc_risk,
    simulate_intervention,
    simulate_natural,
)
from ccwsim.errors import ConfigurationError, DegenerateStratumError
from ccwsim.scenarios import CATALOG

from oracles import OUTCOME_EQUATIONS, brute_risk_by_enumeration, hand_natural_trace

TM = DEFAULT_TREATMENT


def test_p_c1_recovered_from_scenario_A():
    # 0.264 = q * (1 - 0.85**3) + (1 - q) * (1 - 0.95**3)
    hi, lo = 1 - 0.85**3, 1 - 0.95**3
    assert hi == pytest.approx(0.385875)
    assert lo == pytest.approx(0.142625)
    q = (0.264 - lo) / (hi - lo)
    assert q == pytest.approx(0.499, abs=1e-3)
    # the three-decimal 0.264 is consistent with q = 0.5 after rounding
    assert round(0.5 * hi + 0.5 * lo, 3) == 0.264


@pytest.mark.parametrize(
    "name, start, expected",
    [("base", 0, 0.674), ("B", 1, 0.418), ("A", None, 0.264)],
)
def test_closed_form_examples(name, start, expected):
    assert closed_form_risk(CATALOG[name], 0.5, start) == pytest.approx(expected, abs=5e-4)


def test_closed_form_scenario_A_derivation():
    expected = 0.5 * (1 - 0.85**3) + 0.5 * (1 - 0.95**3)
    assert closed_form_risk(CATALOG["A"], 0.5, None) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("name", list(CATALOG))
@pytest.mark.parametrize("start", [0, 1, 2, None])
def test_closed_form_matches_enumeration(name, start):
    assert closed_form_risk(CATALOG[name], 0.3, start) == pytest.approx(
        brute_risk_by_enumeration(OUTCOME_EQUATIONS[name], 0.3, start), abs=1e-14
    )


def test_cumulative_exposure_counts_current_period():
    # start at 0 in scenario E gives hazards .10/.15/.20 for C=0; anything else misses 48.4%
    assert closed_form_risk(CATALOG["E"], 0.5, 0) == pytest.approx(0.484, abs=1e-12)
    lagged = 0.5 * (1 - 0.95 * 0.90 * 0.85) + 0.5 * (1 - 0.85 * 0.80 * 0.75)
    assert abs(lagged - 0.484) > 0.05


def test_hand_unrolled_trace():
    base = CATALOG["base"]
    cohort = simulate_natural(base, TM, 5, seed=7)
    expected = hand_natural_trace(OUTCOME_EQUATIONS["base"], TM.p_c1, TM.p_init, seed=7, n=5)
    assert [(p.id, p.c, p.start_time, p.event_period) for p in cohort] == expected


def test_hand_trace_larger_replicate():
    cohort = simulate_natural(CATALOG["D"], TM, 300, seed=11, replicate=3)
    expected = hand_natural_trace(OUTCOME_EQUATIONS["D"], TM.p_c1, TM.p_init, seed=11, n=300, rep=3)
    assert [(p.id, p.c, p.start_time, p.event_period) for p in cohort] == expected


def test_no_initiation_when_probabilities_zero():
    tm = TreatmentModel(0.5, ((0, 0), (0, 0), (0, 0)))
    cohort = simulate_natural(CATALOG["base"], tm, 2000, seed=1)
    assert all(p.start_time is None for p in cohort)


def test_single_person_risk_is_binary():
    est = mc_risk(CATALOG["base"], TM, Intervention.natural(), 1, 1, seed=3)
    assert est.risk in (0.0, 1.0)


def test_persons_prefix_stable_and_worker_independent():
    a = simulate_natural(CATALOG["E"], TM, 1000, seed=5)
    b = simulate_natural(CATALOG["E"], TM, 1500, seed=5, workers=4)
    assert list(a) == list(b)[:1000]


def test_uniform_chunks_are_order_independent():
    full = streams.person_uniforms(9, 2, 0, 50, 3)
    parts = [streams.person_uniforms(9, 2, a, b, 3) for a, b in [(30, 50), (0, 7), (7, 30)]]
    assert np.array_equal(full, np.concatenate([parts[1], parts[2], parts[0]]))
    assert np.array_equal(full, streams.cohort_uniforms(9, 2, 50, 3, workers=3))


def test_paths_are_persistent_and_absorbing():
    cohort = simulate_natural(CATALOG["base"], TM, 5000, seed=2)
    for p in cohort[:500]:
        if p.start_time is not None and p.event_period is not None:
            assert p.start_time <= p.event_period


def test_intervention_paths():
    base = CATALOG["base"]
    s0 = simulate_intervention(base, TM, Intervention.start_at_0(), 2000, 4)
    assert (s0.start_time == 0).all()
    s1 = simulate_intervention(base, TM, Intervention.start_at_1(), 2000, 4)
    assert np.all((s1.start_time == 1) | (s1.event_period == 0))
    assert np.all(s1.start_time[s1.event_period == 0] == -1)
    feas = simulate_intervention(base, TM, Intervention.feasible(), 2000, 4)
    survived = feas.event_period != 0
    assert np.isin(feas.start_time[survived], [0, 1]).all()
    nat = simulate_natural(base, TM, 2000, 4)
    # period-0 course is identical under natural and feasible (common random numbers)
    assert np.array_equal(nat.start_time == 0, feas.start_time == 0)
    assert np.array_equal(nat.event_period == 0, feas.event_period == 0)


def test_impossible_history_drawn_from_same_stratum_survivors():
    spec = CATALOG["base"]
    imp = simulate_intervention(spec, TM, Intervention.impossible(), 50_000, 8)
    nat = simulate_natural(spec, TM, 50_000, 8)
    hist = imp.history_start
    forced = (nat.event_period != 0) & ~np.isin(nat.start_time, [0, 1])
    assert np.array_equal(imp.start_time[forced], np.ones(forced.sum()))
    for c in (0, 1):
        donors = (nat.event_period != 0) & np.isin(nat.start_time, [0, 1]) & (nat.c == c)
        share0 = np.mean(nat.start_time[donors] == 0)
        drawn0 = np.mean(hist[forced & (nat.c == c)] == 0)
        assert drawn0 == pytest.approx(share0, abs=0.02)
    assert np.array_equal(hist[~forced & (imp.start_time >= 0)], imp.start_time[~forced & (imp.start_time >= 0)])


def test_impossible_degenerate_stratum():
    tm = TreatmentModel(0.5, ((0.0, 0.4), (0.0, 0.3), (0.0, 0.0)))
    with pytest.raises(DegenerateStratumError, match="C=0"):
        simulate_intervention(CATALOG["base"], tm, Intervention.impossible(), 1000, 1)
    # the marginal variant borrows from C=1 initiators instead
    simulate_intervention(CATALOG["base"], tm, Intervention.impossible(history="marginal"), 1000, 1)


def test_delayed_window_zero_start_equals_feasible():
    spec = CATALOG["E"]
    a = simulate_intervention(spec, TM, Intervention.delayed_window(0, 1), 5000, 3)
    b = simulate_intervention(spec, TM, Intervention.feasible(), 5000, 3)
    assert list(a) == list(b)


def test_delayed_window_blocks_early_initiation():
    tm = TreatmentModel(0.5, ((0.5, 0.5), (0.3, 0.4), (0.2, 0.2)))
    c = simulate_intervention(CATALOG["base"], tm, Intervention.delayed_window(1, 2), 5000, 3)
    started = c.start_time[c.start_time >= 0]
    assert started.min() >= 1
    assert np.all((c.start_time == 1) | (c.start_time == 2) | (c.event_period <= 1))


def test_invalid_inputs():
    with pytest.raises(ConfigurationError):
        TreatmentModel(1.2)
    with pytest.raises(ConfigurationError):
        TreatmentModel(0.5, ((0.2, 1.5),))
    with pytest.raises(ConfigurationError):
        Intervention("sometimes")
    with pytest.raises(ConfigurationError):
        simulate_natural(CATALOG["A"], TM, 0, 1)
    with pytest.raises(ConfigurationError):
        mc_risk(CATALOG["A"], TM, Intervention.natural(), 10, 0, 1)
    with pytest.raises(ConfigurationError):
        PersonPath(1, 0, 2, 1)


N, REPS = 100_000, 2
TOL = 3 * math.sqrt(0.25 / (N * REPS))


@pytest.mark.parametrize("name", list(CATALOG))
def test_mc_matches_closed_form(name):
    spec = CATALOG[name]
    for iv, start in ((Intervention.start_at_0(), 0), (Intervention.start_at_1(), 1)):
        est = mc_risk(spec, TM, iv, N, REPS, seed=101)
        assert est.risk == pytest.approx(closed_form_risk(spec, TM.p_c1, start), abs=TOL)


@pytest.mark.parametrize("name", ["A", "C"])
def test_interventions_agree_when_timing_irrelevant(name):
    spec = CATALOG[name]
    ivs = [Intervention.start_at_0(), Intervention.start_at_1(), Intervention.feasible(), Intervention.impossible()]
    risks = [mc_risk(spec, TM, iv, N, REPS, seed=5).risk for iv in ivs]
    assert max(risks) - min(risks) < TOL


@pytest.mark.parametrize(
    "tm",
    [TM, TreatmentModel(0.5, ((0.6, 0.7), (0.1, 0.2), (0.0, 0.0))), TreatmentModel(0.3, ((0.05, 0.1), (0.5, 0.5), (0.2, 0.2)))],
)
def test_scenario_B_feasible_equals_impossible_between_bounds(tm):
    spec = CATALOG["B"]
    feas = mc_risk(spec, tm, Intervention.feasible(), N, REPS, seed=6).risk
    imp = mc_risk(spec, tm, Intervention.impossible(), N, REPS, seed=6).risk
    lo, hi = closed_form_risk(spec, tm.p_c1, 1), closed_form_risk(spec, tm.p_c1, 0)
    assert feas == pytest.approx(imp, abs=TOL)
    assert lo < feas < hi


@pytest.mark.parametrize("name", ["base", "D", "E"])
def test_impossible_exceeds_feasible_with_history_effects(name):
    spec = CATALOG[name]
    feas = mc_risk(spec, TM, Intervention.feasible(), N, REPS, seed=9).risk
    imp = mc_risk(spec, TM, Intervention.impossible(), N, REPS, seed=9).risk
    assert imp - feas > TOL


def test_mc_risk_worker_independent():
    spec = CATALOG["base"]
    a = mc_risk(spec, TM, Intervention.impossible(), 20_000, 4, seed=77)
    b = mc_risk(spec, TM, Intervention.impossible(), 20_000, 4, seed=77, workers=3)
    assert a == b
    assert a.reps == 4 and a.n == 20_000 and a.method == "mc:impossible"


def test_cohort_from_paths_round_trip():
    paths = [PersonPath(0, 1, None, 2), PersonPath(1, 0, 0, None), PersonPath(5, 1, 1, 1)]
    cohort = Cohort.from_paths(paths, 3)
    assert list(cohort) == paths
    assert cohort.risk() == pytest.approx(2 / 3)
