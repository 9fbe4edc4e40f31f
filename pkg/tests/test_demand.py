from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pricesignal.consumer import BeliefSystem, FirmStrategy
from pricesignal.demand import (
    DemandModel,
    demand,
    demand_monte_carlo,
    demand_quadrature,
    deviation_demand,
    good_type_low_price_profit,
    profile_model,
    profit,
)
from pricesignal.equilibrium import Profile
from pricesignal.market import ParameterError, c1

V01 = 1 / 30
D_G = 0.5 * (1 + 0.5 * (1 - V01))


def test_guess_demands(C1, guess):
    g = demand(C1, 0, 20, guess)
    b = demand(C1, 0, 21, guess)
    assert g.total == pytest.approx(D_G, abs=1e-12)
    assert b.total == pytest.approx(0.1975, abs=1e-12)
    assert profit(C1, "G", 0.2, g).profit == pytest.approx(0.2 * D_G, abs=1e-12)
    assert profit(C1, "B", 0.21, b).profit == pytest.approx(0.001975, abs=1e-12)


def test_demand_vanishes_above_top_valuation(C1):
    p = C1.replace(N=340)
    prof = Profile.symmetric_pure(p, 20, 21)
    for idx in (321, 330, 340):
        for bel in (0.0, 0.5, 1.0):
            assert deviation_demand(p, 0, idx, bel, prof).total == 0.0


def test_pooling_deviation_examples(C1, pooling21):
    assert deviation_demand(C1, 0, 20, 1.0, pooling21).total == pytest.approx(0.5, abs=1e-12)
    assert deviation_demand(C1, 0, 20, 0.0, pooling21).total == pytest.approx(0.0, abs=1e-12)
    assert demand(C1, 0, 21, pooling21).total == pytest.approx(0.4725, abs=1e-12)


def test_on_path_deviation_equals_demand(C1, guess):
    for idx in (20, 21):
        assert deviation_demand(C1, 1, idx, guess.beliefs[1][idx], guess) == demand(C1, 1, idx, guess)


def test_zero_margin_means_zero_profit(C1):
    assert profit(C1, "B", C1.c_B, 0.7).profit == 0.0
    assert profit(C1, "G", 0.0, 0.3).profit == 0.0


def test_low_price_profit_closed_form(C1, guess):
    assert good_type_low_price_profit(C1, 0, V01) == 0.0
    assert good_type_low_price_profit(C1, 10, 0.0775) == pytest.approx(0.5 * 0.1 * (1 + 0.5 * 0.9225))
    with pytest.raises(ParameterError):
        good_type_low_price_profit(C1, 21, V01)
    model = profile_model(C1, guess, 0)
    for idx in range(C1.k + 1):
        P = C1.price(idx)
        assert P * model.total(idx, 1.0) == pytest.approx(good_type_low_price_profit(C1, idx, V01), abs=1e-9)


def test_population_is_conserved(C1, guess, pooling21):
    for prof in (guess, pooling21):
        model = profile_model(C1, prof, 0)
        for idx in range(0, 321, 7):
            for bel in (0.0, 0.4, 1.0):
                r = model(idx, bel)
                assert r.own_side == pytest.approx(0.5, abs=1e-9)
                assert r.total == pytest.approx(r.own_buyers + r.switchers_in, abs=1e-12)
                assert 0.0 <= r.total <= 1.0


def _profile(p, g, b, off):
    return Profile.symmetric_pure(p, g, b, off)


profiles = st.builds(
    lambda g, d, off: (g, g + d, off), st.integers(0, 200), st.integers(0, 60), st.sampled_from([0.0, 0.5, 1.0])
)


@settings(max_examples=40, deadline=None)
@given(profiles, st.integers(0, 320))
def test_demand_weakly_increases_with_belief(prof, idx):
    p = c1()
    model = profile_model(p, _profile(p, *prof), 0)
    vals = [model.total(idx, b) for b in (0.0, 0.25, 0.5, 0.75, 1.0)]
    assert all(x <= y + 1e-12 for x, y in zip(vals, vals[1:]))


@settings(max_examples=40, deadline=None)
@given(profiles, st.sampled_from([0.0, 0.25, 0.5, 1.0]))
def test_demand_weakly_decreases_with_price(prof, bel):
    p = c1()
    model = profile_model(p, _profile(p, *prof), 0)
    vals = [model.total(i, bel) for i in range(0, 321, 3)]
    assert all(y <= x + 1e-12 for x, y in zip(vals, vals[1:]))


@settings(max_examples=25, deadline=None)
@given(profiles, st.integers(0, 320), st.floats(0.0, 1.0))
def test_exact_demand_matches_quadrature(prof, idx, bel):
    p = c1()
    pr = _profile(p, *prof)
    own, rival = pr.offers(0, p.mu0), pr.offers(1, p.mu0)
    exact = DemandModel(p, own, rival).total(idx, bel)
    assert exact == pytest.approx(demand_quadrature(p, idx, bel, own, rival), abs=1e-4)


def test_mixed_profile_against_oracles(C1):
    s = FirmStrategy({18: 0.3, 20: 0.7}, {21: 0.6, 25: 0.4})
    b = BeliefSystem.consistent(C1.mu0, s, C1.N + 1, 0.2)
    pr = Profile((s, s), (b, b))
    own, rival = pr.offers(0, C1.mu0), pr.offers(1, C1.mu0)
    model = DemandModel(C1, own, rival)
    for idx, bel in ((19, 0.7), (22, 0.0), (40, 1.0)):
        exact = model.total(idx, bel)
        assert exact == pytest.approx(demand_quadrature(C1, idx, bel, own, rival), abs=1e-4)
        mean, se = demand_monte_carlo(C1, idx, bel, own, rival, n=200_000, seed=idx)
        assert abs(mean - exact) <= 4 * se + 1e-12


def test_unnormalised_offers_are_rejected(C1):
    with pytest.raises(ValueError, match="normalised"):
        DemandModel(C1, [(0.5, 20, 1.0)], [(1.0, 21, 0.0)])
