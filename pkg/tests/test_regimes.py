from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from growthctl.arcs import ArcKind, build_trajectory, trajectory_objective
from growthctl.errors import DomainError, InvalidParameterError, NoSolutionError
from growthctl.model import ModelParams, State
from growthctl.regimes import (
    GROWTH_REGIMES,
    Regime,
    Scenario,
    classification_trajectory,
    classify,
    expstat_necessary_check,
    expstat_switch_time,
    explin_nutrient_margin,
    explin_switch_time,
    explin_threshold,
    explinstat_residual,
    explinstat_switch_times,
    linstat_switch_time,
    long_horizon_regime,
    plan_times,
    regime_map,
    regime_plan,
    short_horizon_regime,
)

from conftest import params
from reference import dense_grid_min

E, L, S = ArcKind.EXPONENTIAL, ArcKind.LINEAR, ArcKind.STATIONARY

# storage first, then enzyme, then stationary (a_M > a_E)
LINEXPSTAT = Scenario(ModelParams(k_M=0.7, k_E=0.2, a_M=1.0, a_E=0.4, b_M=1.5, b_E=0.75), State(3.0, 3.5, 1.0), 6.5)
# enzyme, storage, enzyme again, then stationary
FOUR_ARCS = Scenario(ModelParams(k_M=0.77, k_E=1.37, a_M=6.5, a_E=0.32, b_M=1.5, b_E=0.52), State(7.5, 5.4, 2.0), 1.08)

finite_params = st.lists(st.floats(0.1, 10.0), min_size=6, max_size=6).map(lambda v: ModelParams(*v))
states = st.tuples(st.floats(0.01, 10.0), st.floats(0.0, 10.0), st.floats(0.1, 10.0)).map(lambda v: State(*v))


# --- examples ---------------------------------------------------------------


def test_linear_example(linear_scenario):
    cls = classify(linear_scenario)
    assert cls.regime is Regime.LINEAR
    assert cls.method == "closed-form"
    assert cls.objective == pytest.approx(0.75, rel=1e-15)
    assert cls.certificate.passed


def test_explin_example(explin_scenario):
    cls = classify(explin_scenario)
    assert cls.regime is Regime.EXPLIN
    assert cls.tau1 == pytest.approx(1.0, abs=1e-15)
    assert cls.gamma1 == 0.0
    assert cls.certificate.passed


def test_exponential_example(exponential_scenario):
    cls = classify(exponential_scenario)
    assert cls.regime is Regime.EXPONENTIAL
    assert cls.margins["nutrient"] == pytest.approx(100 - 2 * (math.e - 1), rel=1e-14)
    assert cls.certificate.passed


def test_linstat_example(linstat_scenario):
    cls = classify(linstat_scenario)
    assert cls.regime is Regime.LINSTAT
    assert cls.tau_s == pytest.approx(1.0, rel=1e-15)
    assert cls.gamma1 == pytest.approx(9.0, rel=1e-15)
    assert cls.margins["yield_order"] == 1.0
    assert cls.certificate.passed


def test_expstat_example(expstat_scenario):
    cls = long_horizon_regime(expstat_scenario)
    assert cls.regime is Regime.EXPSTAT
    assert cls.tau_s == pytest.approx(1.0, rel=1e-14)
    assert cls.gamma1 == pytest.approx(4.0, rel=1e-14)


@pytest.mark.parametrize("p", [params(), params(k_M=3.0, b_E=0.1), params(a_M=7.0, a_E=0.2)])
def test_no_enzyme_is_degenerate(p):
    cls = classify(Scenario(p, State(5, 1, 0), 3.0))
    assert cls.regime is Regime.DEGENERATE
    assert cls.objective == pytest.approx(3.0 * p.b_M)
    assert cls.certificate.passed


def test_zero_horizon_and_no_nutrient_are_degenerate():
    assert classify(Scenario(params(), State(5, 1, 1), 0.0)).regime is Regime.DEGENERATE
    cls = classify(Scenario(params(), State(0, 1, 1), 2.0))
    assert cls.regime is Regime.DEGENERATE
    # a price high enough that no growth mode pays off anywhere
    assert cls.gamma1 == pytest.approx(2.0)
    assert cls.certificate.passed


# --- short horizons ---------------------------------------------------------


def test_just_below_threshold_is_linear():
    cls = short_horizon_regime(Scenario(params(), State(100, 0, 1), 0.9))
    assert cls.regime is Regime.LINEAR
    assert cls.margins["threshold"] == pytest.approx(0.1, rel=1e-12)


def test_at_threshold_is_explin_with_zero_switch():
    p = params()
    cls = short_horizon_regime(Scenario(p, State(100, 0, 1), explin_threshold(p)))
    assert cls.regime is Regime.EXPLIN
    assert cls.tau1 == 0.0
    assert "threshold" in cls.boundary
    lin = trajectory_objective(p, build_trajectory(p, [(L, 1.0)], State(100, 0, 1)))
    assert cls.objective == pytest.approx(lin, rel=1e-15)


def test_equal_rates_prefer_exponential():
    cls = short_horizon_regime(Scenario(params(b_M=1.0, b_E=1.0), State(100, 0, 1), 1.0))
    assert cls.regime is Regime.EXPONENTIAL
    assert "rate_order" in cls.boundary


def test_short_horizon_signals_depletion():
    assert short_horizon_regime(Scenario(params(), State(0.1, 0, 1), 2.0)) is None


@pytest.mark.parametrize(
    "p, T, expected",
    [(params(), 2.0, 1.0), (params(k_M=2.0, b_M=1.0, b_E=1.0), 3.0, 2.0)],
)
def test_explin_switch_time(p, T, expected):
    assert explin_switch_time(p, T) == pytest.approx(expected, rel=1e-15)


def test_explin_switch_time_domain():
    with pytest.raises(DomainError):
        explin_switch_time(params(b_E=3.0), 5.0)
    with pytest.raises(DomainError):
        explin_switch_time(params(), 0.5)
    thr = explin_threshold(params())
    assert explin_switch_time(params(), thr * (1 + 1e-9)) == pytest.approx(thr * 1e-9, rel=1e-6)


def test_explin_nutrient_margin_is_terminal_nutrient():
    p = ModelParams(1.7, 0.9, 1.2, 0.8, 2.5, 0.6)
    x0 = State(40.0, 0.5, 1.5)
    T = 3.0
    tau1 = explin_switch_time(p, T)
    traj = build_trajectory(p, regime_plan(Regime.EXPLIN, T, tau1), x0)
    assert explin_nutrient_margin(p, x0, T, tau1) == pytest.approx(traj.x_end.x_N, rel=1e-13)
    assert explin_nutrient_margin(p, x0, T, tau1, literal=True) != pytest.approx(traj.x_end.x_N, rel=1e-3)


# --- long horizons ----------------------------------------------------------


def test_linstat_switch_time():
    p = params()
    assert linstat_switch_time(p, State(2, 0, 1)) == pytest.approx(1.0)
    assert linstat_switch_time(p, State(0, 0, 1)) == 0.0
    assert linstat_switch_time(p, State(2, 0, 2)) == pytest.approx(0.5)


def test_expstat_switch_time():
    p = params(b_E=2.0)
    assert expstat_switch_time(p, State(2 * (math.e - 1), 0, 1)) == pytest.approx(1.0, rel=1e-15)


def test_expstat_check_when_exponential_is_faster(expstat_scenario):
    s = expstat_scenario
    check = expstat_necessary_check(s, 1.0)
    assert check.ok
    assert check.margin == pytest.approx((2.0 / 1.0 - 1.0) * (5.0 - 1.0))
    assert check.sigma_min == 0.0
    assert check.lambert_consistent


def test_expstat_check_counterexample():
    p = ModelParams(k_M=1.0, k_E=1.0, a_M=1.01, a_E=1.0, b_M=1.0, b_E=0.1)
    s = Scenario(p, State(1, 0, 1), 10.0)
    check = expstat_necessary_check(s, 5.0)
    assert not check.ok
    c, off = 0.1, 0.01 * 5.0
    _, ref = dense_grid_min(lambda x: c * np.expm1(x) - x + off, 0.0, 5.0)
    assert check.margin == pytest.approx(ref, abs=1e-9)
    assert check.lambert_consistent
    assert any(0 < r < 5 for r in check.roots)


def test_expstat_check_early_onset(rng):
    for _ in range(100):
        p = ModelParams(*np.exp(rng.uniform(np.log(0.1), np.log(10), 6)))
        p = replace(p, a_M=p.a_E * rng.uniform(1.01, 5.0))
        T = rng.uniform(0.5, 10.0)
        tau_s = rng.uniform(0.0, 1.0) * (1 - p.a_E / p.a_M) * T
        check = expstat_necessary_check(Scenario(p, State(1, 0, 1), T), tau_s)
        assert check.ok
        assert check.lambert_consistent


def test_explinstat_equal_yields_reduce_to_threshold(explinstat_scenario):
    s = explinstat_scenario
    tau1, tau_s = explinstat_switch_times(s)
    assert tau_s - tau1 == pytest.approx(explin_threshold(s.params), rel=1e-9)
    cls = classify(s)
    assert cls.regime is Regime.EXPLINSTAT
    assert cls.certificate.passed


def test_explinstat_beats_grid(explinstat_scenario):
    s = explinstat_scenario
    p, x0, T = s.params, s.x0, s.T
    cls = classify(s, certify=False)
    # brute force over (tau1, tau_s) with the arc integrals written out
    t1, ts = np.meshgrid(np.linspace(0, T, 500), np.linspace(0, T, 500), indexing="ij")
    ok = ts >= t1
    d = np.where(ok, ts - t1, 0.0)
    g = np.exp(p.k_E * t1)
    x_E1 = x0.x_E * g
    x_N2 = x0.x_N - p.a_E * p.b_E * x0.x_E * (g - 1) - p.a_M * p.b_M * p.k_M * x_E1 * d
    x_M2 = x0.x_M + p.k_M * x_E1 * d
    J = (p.b_M * x0.x_M * t1 + p.b_E * x0.x_E * (g - 1) / p.k_E
         + (p.b_M * x0.x_M + p.b_E * x_E1) * d + 0.5 * p.b_M * p.k_M * x_E1 * d * d
         + (p.b_M * x_M2 + p.b_E * x_E1) * (T - ts))
    J = np.where(ok & (x_N2 >= 0), J, -np.inf)
    assert cls.objective >= J.max() - 1e-6


def test_explinstat_boundary_limit_is_linstat(explinstat_scenario):
    s = explinstat_scenario
    tau_s, _ = explinstat_residual(s, 0.0)
    assert tau_s == pytest.approx(linstat_switch_time(s.params, s.x0), rel=1e-15)


def test_explinstat_balance_depletes_exactly(explinstat_scenario):
    s = explinstat_scenario
    p = s.params
    tau1, tau_s = explinstat_switch_times(s)
    traj = build_trajectory(p, regime_plan(Regime.EXPLINSTAT, s.T, tau1, tau_s), s.x0)
    assert abs(traj.arcs[1].x_end.x_N) <= 1e-9
    lit = explinstat_residual(s, tau1, literal_balance=True)[0]
    assert abs(lit - tau_s) > 1e-3


def test_explinstat_rejects_cheaper_enzyme():
    with pytest.raises(DomainError):
        explinstat_switch_times(Scenario(params(a_M=2.0), State(10, 0, 1), 6.0))
    with pytest.raises(NoSolutionError):
        explinstat_switch_times(Scenario(params(), State(10, 0, 0), 6.0))


def test_linexpstat_by_comparison():
    cls = classify(LINEXPSTAT)
    assert cls.regime is Regime.LINEXPSTAT
    assert cls.method == "by-comparison"
    assert cls.certificate.passed
    assert cls.tau1 == pytest.approx(2.673755690734287, rel=1e-9)
    assert cls.tau_s == pytest.approx(5.152889442702285, rel=1e-9)
    assert cls.objective == pytest.approx(54.69126716853513, rel=1e-12)
    assert cls.gamma1 == pytest.approx((6.5 - cls.tau_s) / 0.4, rel=1e-12)


def test_four_arc_optimum():
    cls = classify(FOUR_ARCS)
    assert cls.regime is Regime.GENERAL
    assert [k for k, _ in cls.plan] == [E, L, E, S]
    assert sum(d for _, d in cls.plan) == pytest.approx(FOUR_ARCS.T, rel=1e-14)
    assert cls.certificate.passed
    assert cls.objective == pytest.approx(11.395574021594, rel=1e-9)
    assert (cls.tau1, cls.tau_s) == plan_times(cls.plan)
    traj = classification_trajectory(FOUR_ARCS, cls)
    assert abs(traj.x_end.x_N) <= 1e-9
    assert cls.to_dict()["arcs"][1][0] == "Linear"


def test_general_has_no_fixed_arcs():
    with pytest.raises(ValueError):
        Regime.GENERAL.arcs
    with pytest.raises(ValueError):
        regime_plan(Regime.GENERAL, 1.0)
    assert Regime.GENERAL not in GROWTH_REGIMES
    assert Regime.from_arcs((L, E, S)) is Regime.LINEXPSTAT


# --- properties --------------------------------------------------------------


def _clear(cls) -> bool:
    return not cls.boundary and all(abs(m) > 1e-6 for m in cls.margins.values())


@settings(max_examples=40, deadline=None)
@given(finite_params, states, st.floats(0.1, 10.0), st.floats(0.2, 5.0))
def test_time_rescaling(p, x0, T, c):
    a = classify(Scenario(p, x0, T), certify=False)
    assume(_clear(a))
    q = replace(p, k_M=p.k_M * c, k_E=p.k_E * c)
    b = classify(Scenario(q, x0, T / c), certify=False)
    assert b.regime is a.regime
    for ta, tb in ((a.tau1, b.tau1), (a.tau_s, b.tau_s)):
        assert (ta is None) == (tb is None)
        if ta is not None:
            assert tb == pytest.approx(ta / c, rel=1e-7, abs=1e-9 * T)
    assert b.objective == pytest.approx(a.objective / c, rel=1e-9)


@settings(max_examples=40, deadline=None)
@given(finite_params, states, st.floats(0.1, 10.0), st.floats(0.2, 5.0))
def test_biomass_weight_scaling(p, x0, T, c):
    a = classify(Scenario(p, x0, T), certify=False)
    assume(_clear(a))
    # scaling b also scales the per-unit nutrient cost a*b; keep that fixed
    q = replace(p, b_M=p.b_M * c, b_E=p.b_E * c, a_M=p.a_M / c, a_E=p.a_E / c)
    b = classify(Scenario(q, x0, T), certify=False)
    assert b.regime is a.regime
    for ta, tb in ((a.tau1, b.tau1), (a.tau_s, b.tau_s)):
        if ta is not None:
            assert tb == pytest.approx(ta, rel=1e-7, abs=1e-9 * T)
    assert b.objective == pytest.approx(a.objective * c, rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(finite_params, st.floats(0.1, 5.0), st.floats(0.2, 5.0))
def test_biomass_weight_scaling_with_ample_nutrient(p, T, c):
    x0 = State(1e300, 1.0, 1.0)
    a = classify(Scenario(p, x0, T), certify=False)
    assume(_clear(a))
    b = classify(Scenario(replace(p, b_M=p.b_M * c, b_E=p.b_E * c), x0, T), certify=False)
    assert (b.regime, b.tau1, b.tau_s) == (a.regime, pytest.approx(a.tau1), a.tau_s)
    assert b.objective == pytest.approx(a.objective * c, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(finite_params, states, st.floats(0.01, 10.0))
def test_growth_always_beats_standing_still(p, x0, T):
    cls = classify(Scenario(p, x0, T), certify=False)
    assert cls.regime is not Regime.DEGENERATE
    tau1 = cls.tau1 if cls.tau1 is not None else 0.0
    tau_s = cls.tau_s if cls.tau_s is not None else T
    assert 0.0 <= tau1 <= tau_s <= T * (1 + 1e-12)
    assert min(cls.margins.values(), default=0.0) >= -1e-10


# --- sweeps -----------------------------------------------------------------


def test_regime_map_order_and_parallel(linstat_scenario):
    serial = regime_map(linstat_scenario, ("T", [0.5, 2.0, 10.0]), ("a_E", [0.5, 2.0]))
    assert [(r["T"], r["a_E"]) for r in serial] == [(0.5, 0.5), (0.5, 2.0), (2.0, 0.5), (2.0, 2.0), (10.0, 0.5), (10.0, 2.0)]
    assert serial[-1]["regime"] == "LinStat"
    parallel = regime_map(linstat_scenario, ("T", [0.5, 2.0, 10.0]), ("a_E", [0.5, 2.0]), workers=2)
    assert parallel == serial


def test_regime_map_rejects_unknown_axis(linstat_scenario):
    with pytest.raises(InvalidParameterError):
        regime_map(linstat_scenario, ("kA", [1.0]), ("T", [1.0]))
