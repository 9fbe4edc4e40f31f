"""Acceptance criteria AC-1 .. AC-8, each printing one PASS/FAIL line (also echoed in the terminal summary)."""

from __future__ import annotations

import json
import time

import numpy as np
import pytest

from pricesignal import cli
from pricesignal.consumer import BeliefSystem, FirmStrategy
from pricesignal.demand import DemandModel, demand_monte_carlo, demand_quadrature, profile_model
from pricesignal.equilibrium import (
    Profile,
    best_response,
    find_equilibria,
    intuitive_criterion,
    verify_pbe,
)
from pricesignal.market import TOL_CMP, m_star, random_valid_params
from pricesignal.variants import diamond_baseline

pytestmark = pytest.mark.slow


def test_ac1_unique_refined_outcome(C1, c1_certificates, timings, ac_report):
    ic = [c.prices() for c in c1_certificates if c.ic_pass]
    elapsed = timings.get("c1_search", float("nan"))
    ok = ic == [(C1.k, C1.k + 1)] and elapsed <= 300
    prices = [(C1.price(g), C1.price(b)) for g, b in ic]
    ac_report("AC-1", ok, f"IC survivors {prices} (expected [(0.2, 0.21)]); search {elapsed:.1f}s on 1 worker")
    assert ok


def test_ac2_guess_and_deviation_checks(C1, guess, ac_report):
    t0 = time.perf_counter()
    cert = verify_pbe(C1, guess)
    gaps_ok = cert.pbe_pass and max(cert.gaps.values()) <= 1e-12
    model = profile_model(C1, guess, 0)
    bel = guess.beliefs[0]
    pi = [C1.price(i) * model.total(i, bel[i]) for i in range(C1.N + 1)]
    a3 = max(pi[:20]) <= pi[20] + TOL_CMP
    a4 = best_response(C1, 0, "B", guess)[0] == (21,)
    a5 = max(pi[21:]) < pi[20] - TOL_CMP
    elapsed = time.perf_counter() - t0
    ok = gaps_ok and a3 and a4 and a5 and elapsed <= 5
    ac_report("AC-2", ok, f"pbe={cert.pbe_pass} max gap={max(cert.gaps.values()):.3g} low={a3} bad-br={a4} high={a5} {elapsed:.2f}s")
    assert ok


def _structural_properties(p, cert):
    """(ordering, positivity, bad-only price, no good price below c_B) for one certificate."""
    s = cert.profile.strategies[0]
    g_sup, b_sup = set(s.support("G")), set(s.support("B"))
    ordering = cert.demands[(0, "G")] >= cert.demands[(0, "B")] - TOL_CMP
    positive = cert.profits[(0, "G")] > TOL_CMP and cert.profits[(0, "B")] > TOL_CMP
    exclusive = any(i not in g_sup and cert.demands[(0, "B")] > 0 for i in b_sup)
    no_low = all(i >= p.k for i in g_sup)
    return ordering, positive, exclusive, no_low


def test_ac3_structural_properties(C1, c1_certificates, random_params, ac_report):
    cases = [(C1, c) for c in c1_certificates if c.ic_pass]
    for p in random_params:
        cases += [(p, c) for c in find_equilibria(p) if c.ic_pass]
    names = ("ordering", "positive profits", "bad-only price", "no good price below c_B")
    fails = {n: [] for n in names}
    for p, c in cases:
        for n, ok in zip(names, _structural_properties(p, c)):
            if not ok:
                fails[n].append((round(p.price(c.prices()[0]), 6), round(p.price(c.prices()[1]), 6)))
    ok = not any(fails.values())
    detail = f"{len(cases)} certificates; " + "; ".join(f"{n}: {len(v)} violations" for n, v in fails.items())
    ac_report("AC-3", ok, detail)
    assert ok, {n: v[:5] for n, v in fails.items() if v}


def test_ac4_belief_threat_multiplicity(C1, pooling21, ac_report):
    cert = verify_pbe(C1, pooling21)
    r = intuitive_criterion(C1, cert)
    w = r.witness
    gain = None if w is None else w.gain
    ok = (
        cert.pbe_pass
        and not r.passed
        and w.price == pytest.approx(0.2)
        and gain == pytest.approx(0.1 - 0.099225, abs=1e-12)
        and gain > TOL_CMP
    )
    ac_report("AC-4", ok, f"pbe={cert.pbe_pass} ic={r.passed} witness={None if w is None else w.price:.12g} gain={gain:.6g}")
    assert ok


def test_ac5_observable_bound(C1, c1_observable, timings, ac_report):
    certs = c1_observable.certificates
    elapsed = timings.get("c1_observable", float("nan"))
    prices = sorted({C1.price(c.g) for c in certs})
    ok = (
        bool(certs)
        and all(C1.price(c.g) >= 0.82 - 1e-12 for c in certs)
        and all(c.profits[(0, "G")] > 0 for c in certs)
        and elapsed <= 300
    )
    ac_report("AC-5", ok, f"{len(certs)} survivors, good prices {[round(x, 6) for x in prices]}; {elapsed:.1f}s")
    assert ok


def test_ac6_diamond(C1, ac_report):
    g = [C1.price(c.g) for c in diamond_baseline(C1, True)]
    b = [C1.price(c.b) for c in diamond_baseline(C1, False)]
    ok = g == [pytest.approx(1.6, abs=1e-12)] and b == [pytest.approx(0.6, abs=1e-12)]
    ac_report("AC-6", ok, f"good {g} bad {b}")
    assert ok


def _brute_m_star(p, n=1_000_000):
    x = np.linspace(p.c_B, p.mu0 * p.h(p.vbar) + (1 - p.mu0) * p.vbar - p.m, n)
    num = p.F.sf((x - p.h.intercept) / p.h.slope)
    den = p.F.sf((x - p.mu0 * p.h.intercept) / (p.mu0 * p.h.slope + 1 - p.mu0))
    return float(np.min(x * (num / den - 1.0)))


def _random_triple(rng, p):
    n = p.N + 1
    top = int(p.h(p.vbar) / p.m)
    if rng.random() < 0.6:
        g = int(rng.integers(0, top))
        b = int(rng.integers(g, min(top, g + 30) + 1))
        s = FirmStrategy.pure(g, b)
    else:
        gi = rng.choice(top, size=2, replace=False)
        bi = rng.choice(top, size=2, replace=False)
        wg, wb = rng.uniform(0.2, 0.8, size=2)
        s = FirmStrategy({int(gi[0]): wg, int(gi[1]): 1 - wg}, {int(bi[0]): wb, int(bi[1]): 1 - wb})
    bel = BeliefSystem.consistent(p.mu0, s, n, rng.uniform(0, 1, size=n))
    prof = Profile((s, s), (bel, bel))
    idx = int(rng.integers(0, top + 1))
    belief = float(rng.choice([0.0, 1.0, bel[idx], rng.uniform()]))
    return prof.offers(0, p.mu0), prof.offers(1, p.mu0), idx, belief


def test_ac7_oracles(ac_report):
    rng = np.random.default_rng(7007)
    sets = [random_valid_params(rng, max_N=400) for _ in range(20)]
    rel = [abs(m_star(p) - _brute_m_star(p)) / _brute_m_star(p) for p in sets]
    mstar_ok = max(rel) <= 1e-5

    quad_err, z = [], []
    for t in range(200):
        p = sets[t % len(sets)]
        own, rival, idx, belief = _random_triple(rng, p)
        exact = DemandModel(p, own, rival).total(idx, belief)
        quad_err.append(abs(exact - demand_quadrature(p, idx, belief, own, rival)))
        mean, se = demand_monte_carlo(p, idx, belief, own, rival, n=1_000_000, seed=t)
        z.append(abs(mean - exact) / se if se > 0 else (0.0 if mean == exact else np.inf))
    quad_ok = max(quad_err) <= 1e-4
    mc_ok = max(z) <= 3.0
    ok = mstar_ok and quad_ok and mc_ok
    ac_report(
        "AC-7",
        ok,
        f"m* max rel err {max(rel):.2e}; quadrature max abs err {max(quad_err):.2e}; "
        f"MC max |z| {max(z):.2f} ({sum(x > 3 for x in z)} of 200 beyond 3 SE)",
    )
    assert ok


def test_ac8_determinism(C1, tmp_path, ac_report):
    cfg = tmp_path / "c1.json"
    cfg.write_text(json.dumps({"command": "solve", "market": C1.to_dict()}))
    bodies = []
    for w in (1, 8):
        out = tmp_path / f"w{w}"
        assert cli.main(["--config", str(cfg), "--out", str(out), "--workers", str(w)]) == 0
        bodies.append((out / "equilibria.csv").read_bytes())
    ok = bodies[0] == bodies[1] and len(bodies[0].splitlines()) > 1
    ac_report("AC-8", ok, f"equilibria.csv {len(bodies[0])} bytes, identical={bodies[0] == bodies[1]}")
    assert ok
