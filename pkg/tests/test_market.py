from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pricesignal.market import (
    M_STAR_CHECK,
    MONOTONE_CHECK,
    MarketParams,
    ParameterError,
    QualityMap,
    ValuationDistribution,
    c1,
    m_star,
    monopoly_index,
    monopoly_price,
    v_of_x,
    validate,
)


def test_c1_passes_every_check(C1):
    rep = validate(C1)
    assert rep.passed, rep.failures
    assert rep.m_star == pytest.approx(0.2 * (1 / 0.95 - 1), rel=1e-9)
    assert rep.monopoly_G == pytest.approx(1.6)


def test_validate_is_idempotent(C1):
    assert validate(C1) == validate(C1)


def test_coarse_unit_fails_m_star(C1):
    rep = validate(C1.replace(m=0.02, k=10, N=160))
    assert rep.failures == [M_STAR_CHECK]


def test_large_learning_cost_fails_its_bound(C1):
    rep = validate(C1.replace(c_learn=0.4))
    assert "c_learn <= mu0*(h(c_B+) - c_B)" in rep.failures
    assert rep["c_learn <= mu0*(h(c_B+) - c_B)"].rhs == pytest.approx(0.315)


def test_demoted_check_becomes_warning(C1):
    rep = validate(C1.replace(m=0.02, k=10, N=160), demote=(M_STAR_CHECK,))
    assert rep.passed
    assert "warn" in rep.table()


def test_intercept_above_cost_plus_unit_is_an_error(C1):
    rep = validate(C1.replace(h=QualityMap(0.25, 3.0), N=330))
    assert "c_B >= h(0) - m" in rep.failures


@pytest.mark.parametrize(
    "field,value",
    [("mu0", float("nan")), ("m", -0.01), ("c_learn", float("inf")), ("k", 0), ("N", 10)],
)
def test_bad_primitives_name_the_field(C1, field, value):
    with pytest.raises(ParameterError, match=field):
        C1.replace(**{field: value})


def test_v_of_x_examples(C1):
    assert v_of_x(C1, 0.2) == pytest.approx(0.05, abs=1e-12)
    assert v_of_x(C1, 0.1) == pytest.approx(0.0, abs=1e-12)
    assert v_of_x(C1, 2.1) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ParameterError):
        v_of_x(C1, 2.2)


@given(st.floats(0.1, 2.1), st.floats(0.1, 2.1))
def test_v_of_x_monotone(x, y):
    p = c1()
    if x < y:
        assert v_of_x(p, x) <= v_of_x(p, y)
        if y - x > 1e-9:
            assert v_of_x(p, x) < v_of_x(p, y)


def test_m_star_second_example(C1):
    p = C1.replace(h=QualityMap(0.05, 1.5), m=0.0005, k=100, N=3100, c_learn=0.02)
    assert m_star(p) == pytest.approx(0.05 * (1 / 0.98 - 1), rel=1e-6)


def test_monopoly_prices(C1):
    assert monopoly_price(C1, 1.0, 0.0) == pytest.approx(1.6)
    assert monopoly_price(C1, 0.0, C1.c_B) == pytest.approx(0.6)
    assert monopoly_index(C1, 1.0, 0.0) == 160


def test_monopoly_ties_go_low():
    # profit P(1 - P) on a grid symmetric around 0.5 with the optimum between two points
    p = MarketParams(
        mu0=0.5, m=0.1, k=1, N=30, c_learn=0.2, F=ValuationDistribution("uniform", 1.0), h=QualityMap(0.0, 1.5)
    )
    assert monopoly_index(p, 0.0, 0.05) == 5


def test_beta_distribution_is_a_distribution():
    F = ValuationDistribution("scaled-beta", 2.0, 2.0, 3.0)
    v = np.linspace(0, 2, 20001)
    mass = np.trapezoid(F.pdf(v), v)
    assert mass == pytest.approx(1.0, abs=1e-6)
    assert F.cdf(0.0) == 0.0 and F.cdf(2.0) == 1.0
    assert np.all(np.diff(F.cdf(v)) >= 0)
    assert F.sf(1.999999) > 0


def test_beta_rejects_unbounded_density():
    with pytest.raises(ParameterError, match="alpha"):
        ValuationDistribution("scaled-beta", 1.0, 0.5, 2.0)


def test_quality_map_checks():
    assert QualityMap(0.2, 3.0).check(1.0) == []
    assert "h' > 1" in QualityMap(0.2, 0.9).check(1.0)


def test_json_roundtrip(C1):
    d = json.loads(json.dumps(C1.to_dict()))
    assert MarketParams.from_dict(d) == C1


def test_json_unknown_and_missing_fields(C1):
    d = C1.to_dict()
    d["colour"] = 1
    with pytest.raises(ParameterError, match="colour"):
        MarketParams.from_dict(d)
    d = C1.to_dict()
    del d["valuation"]["v_max"]
    with pytest.raises(ParameterError, match="v_max"):
        MarketParams.from_dict(d)


def test_grid_is_integer_exact(C1):
    g = C1.grid
    assert len(g) == 321
    assert g.index(0.21) == 21
    assert C1.c_B == pytest.approx(0.2) and C1.c_B_plus == pytest.approx(0.21)


def _brute_m_star(p, n=1_000_000):
    lo = p.c_B
    hi = p.mu0 * p.h(p.vbar) + (1 - p.mu0) * p.vbar - p.m
    x = np.linspace(lo, hi, n)
    num = p.F.sf((x - p.h.intercept) / p.h.slope)
    den = p.F.sf((x - p.mu0 * p.h.intercept) / (1 + p.mu0 * (p.h.slope - 1)))
    return float(np.min(x * (num / den - 1)))


@settings(max_examples=15, deadline=None)
@given(st.floats(0.3, 0.7), st.floats(0.05, 0.3), st.floats(1.5, 4.0))
def test_m_star_matches_brute_force_on_uniform(mu0, a, s):
    p = MarketParams(
        mu0=mu0, m=0.001, k=int(round(a * 1000)) + 5, N=int(np.ceil((a + s) * 1000)) + 1, c_learn=0.05,
        F=ValuationDistribution("uniform", 1.0), h=QualityMap(a, s),
    )
    assert m_star(p) == pytest.approx(_brute_m_star(p, 200_000), rel=1e-5)
    assert m_star(p) > 0


def test_monotone_check_implies_monopoly_above_c_B_plus(random_params):
    for p in random_params:
        if validate(p)[MONOTONE_CHECK].passed:
            assert monopoly_price(p, 1.0, 0.0) >= p.c_B_plus - 1e-12
