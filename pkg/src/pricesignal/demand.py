"""Firm demand by exact valuation-threshold integration, with quadrature and Monte Carlo oracles."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .consumer import (
    Offer,
    StageOne,
    StageTwo,
    _at,
    choose_stage2,
    gain_line,
    merge_partition,
    stage1_partition,
)
from .market import TOL_INT, MarketParams, ParameterError

log = logging.getLogger(__name__)

QUADRATURE_POINTS = 200_000


@dataclass(frozen=True)
class DemandReport:
    total: float
    own_buyers: float
    switchers_in: float
    learners_out: float
    leavers: float
    cutoffs: tuple[tuple[float, str], ...] = ()
    method: str = "exact"

    @property
    def own_side(self) -> float:
        return self.own_buyers + self.learners_out + self.leavers


@dataclass(frozen=True)
class ProfitQuote:
    price: float
    demand: float
    margin: float
    profit: float


def profit(params: MarketParams, type_: str, price: float, demand: float | DemandReport) -> ProfitQuote:
    d = demand.total if isinstance(demand, DemandReport) else float(demand)
    margin = price - params.cost(type_)
    return ProfitQuote(price, d, margin, margin * d)


def _halfline(alpha: float, beta: float, a: float, b: float, strict: bool) -> tuple[float, float]:
    """Sub-interval of [a, b] where alpha + beta*v >= 0 (> 0 if strict)."""
    if beta == 0.0:
        ok = alpha > 0 if strict else alpha >= 0
        return (a, b) if ok else (a, a)
    root = -alpha / beta
    if beta > 0:
        return (max(a, root), b)
    return (a, min(b, root))


class DemandModel:
    """Demand of one firm against fixed anticipations.

    own_offers   -- how consumers at the rival anticipate this firm's prices (equilibrium play)
    rival_offers -- the rival's price/belief atoms, played as anticipated

    Rival-side learning sets do not depend on this firm's actual price, so they
    are computed once; each query then needs a single own-side partition.
    """

    def __init__(self, params: MarketParams, own_offers, rival_offers, tol_int: float = TOL_INT):
        self.params = params
        self.tol_int = tol_int
        self.own_offers = tuple(Offer(*o) for o in own_offers)
        self.rival_offers = tuple(Offer(*o) for o in rival_offers)
        for name, offs in (("own", self.own_offers), ("rival", self.rival_offers)):
            total = sum(o.weight for o in offs)
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"{name} offers are not normalised (sum {total})")
        p = params
        self._rival_lines = [(o.weight, gain_line(p, o.belief, o.idx)) for o in self.rival_offers]
        own_weighted = [(o.weight, gain_line(p, o.belief, o.idx)) for o in self.own_offers]
        self._rival_learn = []
        for q, line in self._rival_lines:
            parts = merge_partition(stage1_partition(line, own_weighted, p.c_learn, p.vbar))
            self._rival_learn.append([(a, b) for a, b, d in parts if d is StageOne.LEARN])

    def __call__(self, idx: int, belief: float) -> DemandReport:
        rep = self._exact(idx, belief)
        if abs(rep.own_side - 0.5) > self.tol_int or not 0.0 <= rep.total <= 1.0 + self.tol_int:
            log.warning("threshold extraction failed conservation at idx=%d; using quadrature", idx)
            tot = demand_quadrature(self.params, idx, belief, self.own_offers, self.rival_offers)
            return DemandReport(tot, float("nan"), float("nan"), float("nan"), float("nan"), method="quadrature")
        return rep

    def total(self, idx: int, belief: float) -> float:
        return self(idx, belief).total

    def _exact(self, idx: int, belief: float) -> DemandReport:
        p = self.params
        F = p.F.cdf
        dev = gain_line(p, belief, idx)

        stay = out = leave = 0.0
        cutoffs = []
        prev = None
        for a, b, d in stage1_partition(dev, self._rival_lines, p.c_learn, p.vbar):
            mass = F(b) - F(a)
            if d is StageOne.BUY:
                stay += mass
            elif d is StageOne.LEAVE:
                leave += mass
            else:
                mid = 0.5 * (a + b)
                w = _at(dev, mid)
                for q, line in self._rival_lines:
                    s2 = choose_stage2(w, _at(line, mid))
                    if s2 is StageTwo.BUY_ASSIGNED:
                        stay += q * mass
                    elif s2 is StageTwo.BUY_OTHER:
                        out += q * mass
                    else:
                        leave += q * mass
            if prev is not None and d is not prev:
                cutoffs.append((a, f"{prev.value}->{d.value}"))
            prev = d

        switch = 0.0
        for (q, line), learn in zip(self._rival_lines, self._rival_learn):
            diff = (dev[0] - line[0], dev[1] - line[1])
            for a, b in learn:
                a1, b1 = _halfline(dev[0], dev[1], a, b, strict=False)
                a2, b2 = _halfline(diff[0], diff[1], a1, b1, strict=True)
                if b2 > a2:
                    switch += q * (F(b2) - F(a2))

        own_buyers, switchers_in = 0.5 * stay, 0.5 * switch
        return DemandReport(
            total=own_buyers + switchers_in,
            own_buyers=own_buyers,
            switchers_in=switchers_in,
            learners_out=0.5 * out,
            leavers=0.5 * leave,
            cutoffs=tuple(cutoffs),
        )


def demand(params: MarketParams, firm: int, idx: int, profile) -> DemandReport:
    """Demand at a grid price under the profile's stored belief for that price."""
    return deviation_demand(params, firm, idx, profile.beliefs[firm][idx], profile)


def deviation_demand(params: MarketParams, firm: int, idx: int, belief: float, profile) -> DemandReport:
    """Demand at (price, belief) while everyone else anticipates the profile's play."""
    return profile_model(params, profile, firm)(idx, belief)


def profile_model(params: MarketParams, profile, firm: int) -> DemandModel:
    return DemandModel(params, profile.offers(firm, params.mu0), profile.offers(1 - firm, params.mu0))


def good_type_low_price_profit(params: MarketParams, idx: int, v01: float) -> float:
    """Closed-form profit of a good type charging P <= c_B against the separating profile."""
    if idx > params.k:
        raise ParameterError("price must not exceed c_B")
    P = params.price(idx)
    F = params.F.cdf
    return 0.5 * P * (1.0 - F(params.h.inverse(P)) + (1 - params.mu0) * (1.0 - F(v01)))


# -- oracles -----------------------------------------------------------------


def _lines(params, offs):
    return [(o.weight, *gain_line(params, o.belief, o.idx)) for o in offs]


def _bought(params: MarketParams, v: np.ndarray, idx: int, belief: float, own_offers, rival_offers, rival_pick=None):
    """Vectorised indicator (own side) and rival-side switching, straight from the decision rules.

    Returns (own_side, rival_side) arrays; with rival_pick given, each consumer
    faces only that rival atom instead of the weighted mixture.
    """
    c = params.c_learn
    a0, s0 = gain_line(params, belief, idx)
    w = a0 + s0 * v
    rivals = _lines(params, rival_offers)
    mine = _lines(params, own_offers)

    L = -c + sum(q * np.maximum(np.maximum(0.0, w), a + s * v) for q, a, s in rivals)
    learn = (w <= L) & (L >= 0)
    buy = ~learn & (w > np.maximum(0.0, L))
    own = np.zeros_like(v)
    rival = np.zeros_like(v)
    for k, (q, a, s) in enumerate(rivals):
        wk = a + s * v
        stay = buy | (learn & (w >= 0) & (w >= wk))
        # consumers at the rival anticipate this firm's equilibrium atoms
        Lk = -c + sum(qi * np.maximum(np.maximum(0.0, wk), ai + si * v) for qi, ai, si in mine)
        learn_k = (wk <= Lk) & (Lk >= 0)
        switch = learn_k & (w >= 0) & (w > wk)
        if rival_pick is None:
            own += q * stay
            rival += q * switch
        else:
            sel = rival_pick == k
            own += sel * stay
            rival += sel * switch
    return own, rival


def demand_quadrature(
    params: MarketParams, idx: int, belief: float, own_offers, rival_offers, n: int = QUADRATURE_POINTS
) -> float:
    """Midpoint-rule demand on n valuation points, independent of the exact partition."""
    dv = params.vbar / n
    v = (np.arange(n) + 0.5) * dv
    own, rival = _bought(params, v, idx, belief, own_offers, rival_offers)
    return float(0.5 * np.sum((own + rival) * params.F.pdf(v)) * dv)


def demand_monte_carlo(
    params: MarketParams, idx: int, belief: float, own_offers, rival_offers, n: int = 1_000_000, seed: int = 0
) -> tuple[float, float]:
    """Simulate n consumers (valuation, assigned firm, rival atom); returns (mean, standard error)."""
    rng = np.random.default_rng(seed)
    v = params.F.sample(rng, n)
    at_own = rng.random(n) < 0.5
    weights = np.array([o.weight for o in rival_offers])
    pick = rng.choice(len(weights), size=n, p=weights / weights.sum())
    own, rival = _bought(params, v, idx, belief, own_offers, rival_offers, rival_pick=pick)
    x = np.where(at_own, own, rival)
    return float(x.mean()), float(x.std(ddof=1) / np.sqrt(n))
