"""Equilibrium verification, best responses, the Intuitive Criterion and the pure symmetric search."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .consumer import (
    BeliefSystem,
    FirmStrategy,
    StageOne,
    StageTwo,
    gain,
    offers,
    posterior,
    stage1,
    stage2,
)
from .demand import DemandModel
from .market import TOL_CMP, TOL_INT, MarketParams, monopoly_index

log = logging.getLogger(__name__)

TYPES = ("G", "B")


@dataclass(frozen=True)
class Profile:
    strategies: tuple[FirmStrategy, FirmStrategy]
    beliefs: tuple[BeliefSystem, BeliefSystem]

    def offers(self, firm: int, mu0: float):
        return offers(mu0, self.strategies[firm], self.beliefs[firm])

    @property
    def symmetric(self) -> bool:
        return self.strategies[0] == self.strategies[1] and self.beliefs[0] == self.beliefs[1]

    @classmethod
    def symmetric_pure(cls, params: MarketParams, g_idx: int, b_idx: int, off_path=0.0) -> "Profile":
        s = FirmStrategy.pure(g_idx, b_idx)
        b = BeliefSystem.consistent(params.mu0, s, params.N + 1, off_path)
        return cls((s, s), (b, b))

    def check(self, params: MarketParams) -> None:
        n = params.N + 1
        for firm in (0, 1):
            s, b = self.strategies[firm], self.beliefs[firm]
            if len(b) != n:
                raise ValueError(f"firm {firm}: belief vector has {len(b)} entries, grid has {n}")
            if any(not 0 <= i < n for t in TYPES for i in s.support(t)):
                raise ValueError(f"firm {firm}: strategy puts mass off the price grid")
            if not b.is_consistent(params.mu0, s):
                raise ValueError(f"firm {firm}: on-path beliefs violate Bayes' rule")

    def to_dict(self) -> dict:
        return {
            "firms": [
                {"strategy": s.to_dict(), "beliefs": b.values.tolist()} for s, b in zip(self.strategies, self.beliefs)
            ]
        }

    @classmethod
    def from_dict(cls, d: dict, params: MarketParams) -> "Profile":
        firms = d["firms"]
        if len(firms) == 1:
            firms = firms * 2
        strategies, beliefs = [], []
        for f in firms:
            st = f["strategy"]
            s = FirmStrategy({int(k): v for k, v in st["G"].items()}, {int(k): v for k, v in st["B"].items()})
            if "beliefs" in f:
                b = BeliefSystem(f["beliefs"])
            elif "beliefs_good_up_to" in f:
                b = BeliefSystem.threshold(params.N + 1, int(f["beliefs_good_up_to"]))
            else:
                b = BeliefSystem.consistent(params.mu0, s, params.N + 1, f.get("off_path_belief", 0.0))
            strategies.append(s)
            beliefs.append(b)
        return cls(tuple(strategies), tuple(beliefs))


def guessed_equilibrium(params: MarketParams) -> Profile:
    """Good type at c_B, bad type at c_B + m; belief 1 at or below c_B, 0 above."""
    s = FirmStrategy.pure(params.k, params.k + 1)
    b = BeliefSystem.threshold(params.N + 1, params.k)
    return Profile((s, s), (b, b))


# -- per-firm deviation scan -------------------------------------------------


def demand_ceiling(params: MarketParams) -> np.ndarray:
    """Upper bound on demand at each grid price: only consumers with h(v) >= P ever buy."""
    P = params.grid.prices
    return 1.0 - params.F.cdf(params.h.inverse(P))


@dataclass
class TypeScan:
    profit: float
    support_profits: dict[int, float]
    demand: float
    best: float
    witness: int | None

    @property
    def gap(self) -> float:
        return self.best - self.profit


def scan_firm(
    params: MarketParams,
    model: DemandModel,
    supports: dict[str, tuple[tuple[int, float], ...]],
    belief_of,
    tol: float = TOL_CMP,
    early_exit: bool = False,
    order=None,
    ceiling: np.ndarray | None = None,
):
    """Best deviation of each type over the whole grid.

    belief_of(type, idx) gives the belief consumers hold at idx when that type
    deviates there. Prices whose profit ceiling cannot beat the best value found
    so far are skipped, which leaves the maximum exact. With early_exit the scan
    stops at the first strictly profitable deviation and returns (scans, idx).
    """
    cache: dict[tuple[int, float], float] = {}

    def D(idx, b):
        key = (idx, b)
        if key not in cache:
            cache[key] = model.total(idx, b)
        return cache[key]

    res = {}
    for t, atoms in supports.items():
        c = params.cost(t)
        sp = {i: (params.price(i) - c) * D(i, belief_of(t, i)) for i, _ in atoms}
        pi = min(sp.values())
        first = atoms[0][0]
        res[t] = TypeScan(pi, sp, D(first, belief_of(t, first)), max(sp.values()), None)
    if ceiling is None:
        ceiling = demand_ceiling(params)
    idxs = range(params.N + 1) if order is None else order
    for idx in idxs:
        P = params.price(idx)
        for t, r in res.items():
            c = params.cost(t)
            if (P - c) * ceiling[idx] <= r.best:
                continue
            val = (P - c) * D(idx, belief_of(t, idx))
            if val > r.best:
                r.best = val
                r.witness = idx
            if early_exit and val > r.profit + tol:
                return res, idx
    for r in res.values():
        if r.gap <= tol:
            r.witness = None
    return res, None


# -- certificates ------------------------------------------------------------


@dataclass(frozen=True)
class ICWitness:
    firm: int
    idx: int
    price: float
    dominated_type: str
    deviation_profit: float
    equilibrium_profit: float
    dominated_set: tuple[int, ...]

    @property
    def gain(self) -> float:
        return self.deviation_profit - self.equilibrium_profit


@dataclass
class EquilibriumCertificate:
    profile: Profile
    profits: dict[tuple[int, str], float]
    demands: dict[tuple[int, str], float]
    gaps: dict[tuple[int, str], float]
    witnesses: dict[tuple[int, str], int | None]
    pbe_pass: bool
    consumer_violations: int = 0
    ic_pass: bool | None = None
    ic_witness: ICWitness | None = None
    b_dominated: dict[int, tuple[int, ...]] = field(default_factory=dict)
    notes: tuple[str, ...] = ()

    @property
    def pbe_witness(self) -> tuple[int, str, int] | None:
        for (firm, t), idx in sorted(self.witnesses.items()):
            if idx is not None and self.gaps[(firm, t)] > 0:
                return firm, t, idx
        return None

    def prices(self, firm: int = 0) -> tuple[float, float]:
        s = self.profile.strategies[firm]
        return s.support("G")[0], s.support("B")[0]


def consumer_spot_check(params: MarketParams, profile: Profile, samples: int = 1000, seed: int = 0) -> int:
    """Re-check the consumer conditions (a)-(e) literally at random (v, price) draws; returns violations."""
    rng = np.random.default_rng(seed)
    n = params.N + 1
    bad = 0
    for _ in range(samples):
        v = float(rng.uniform(0.0, params.vbar))
        i = int(rng.integers(2))
        j = 1 - i
        Pi, Pj = int(rng.integers(n)), int(rng.integers(n))
        bi, bj = profile.beliefs[i][Pi], profile.beliefs[j][Pj]
        wi = gain(params, v, bi, params.price(Pi))
        wj = gain(params, v, bj, params.price(Pj))

        d2 = stage2(params, v, Pi, bi, Pj, bj)
        if wi >= max(0.0, wj) and d2 is not StageTwo.BUY_ASSIGNED:
            bad += 1
        if wj > wi and wj >= 0 and d2 is not StageTwo.BUY_OTHER:
            bad += 1
        if max(wi, wj) < 0 and d2 is not StageTwo.LEAVE:
            bad += 1

        opp = offers(params.mu0, profile.strategies[j], profile.beliefs[j])
        ws = [(o.weight, gain(params, v, o.belief, params.price(o.idx))) for o in opp]
        s_c = sum(q * max(wi, w) for q, w in ws) - params.c_learn
        s_d = sum(q * max(0.0, wi, w) for q, w in ws) - params.c_learn
        s_e = sum(q * max(0.0, w) for q, w in ws) - params.c_learn
        d1 = stage1(params, v, Pi, bi, profile.strategies[j], profile.beliefs[j])
        if wi > max(0.0, s_c) and d1 is not StageOne.BUY:
            bad += 1
        if wi <= s_d and s_d >= 0 and d1 is not StageOne.LEARN:
            bad += 1
        if max(wi, s_e) < 0 and d1 is not StageOne.LEAVE:
            bad += 1
    return bad


def _models(params: MarketParams, profile: Profile, tol_int: float = TOL_INT):
    firms = (0,) if profile.symmetric else (0, 1)
    return {
        f: DemandModel(params, profile.offers(f, params.mu0), profile.offers(1 - f, params.mu0), tol_int)
        for f in firms
    }


def verify_pbe(
    params: MarketParams,
    profile: Profile,
    tol: float = TOL_CMP,
    spot_checks: int = 1000,
    seed: int = 0,
    tol_int: float = TOL_INT,
) -> EquilibriumCertificate:
    """Check every equilibrium condition of the profile; firm optimality by a full grid scan."""
    profile.check(params)
    violations = consumer_spot_check(params, profile, spot_checks, seed) if spot_checks else 0
    ceiling = demand_ceiling(params)
    profits, demands, gaps, witnesses = {}, {}, {}, {}
    for firm, model in _models(params, profile, tol_int).items():
        beliefs = profile.beliefs[firm]
        supports = {t: profile.strategies[firm].dist(t) for t in TYPES}
        res, _ = scan_firm(params, model, supports, lambda t, i: beliefs[i], tol, ceiling=ceiling)
        targets = (firm,) if not profile.symmetric else (0, 1)
        for f in targets:
            for t, r in res.items():
                profits[(f, t)] = r.profit
                demands[(f, t)] = r.demand
                gaps[(f, t)] = r.gap
                witnesses[(f, t)] = r.witness
    ok = all(g <= tol for g in gaps.values()) and violations == 0
    return EquilibriumCertificate(profile, profits, demands, gaps, witnesses, ok, violations)


def best_response(
    params: MarketParams, firm: int, type_: str, profile: Profile, tol: float = TOL_CMP
) -> tuple[tuple[int, ...], float]:
    """All grid prices maximising the type's profit under the profile's beliefs for `firm`."""
    model = DemandModel(params, profile.offers(firm, params.mu0), profile.offers(1 - firm, params.mu0))
    beliefs = profile.beliefs[firm]
    ceiling = demand_ceiling(params)
    c = params.cost(type_)
    vals = {}
    best = -np.inf
    for idx in range(params.N + 1):
        bound = (params.price(idx) - c) * ceiling[idx]
        if bound < best - tol:
            continue
        vals[idx] = (params.price(idx) - c) * model.total(idx, beliefs[idx])
        best = max(best, vals[idx])
    return tuple(i for i, v in vals.items() if v >= best - tol), float(best)


@dataclass(frozen=True)
class ICResult:
    passed: bool
    witness: ICWitness | None
    b_dominated: dict[int, tuple[int, ...]]


def intuitive_criterion(params: MarketParams, cert: EquilibriumCertificate, tol: float = TOL_CMP) -> ICResult:
    """Equilibrium-dominance test at every off-path price with extreme beliefs.

    Belief 1 maximises any deviation payoff (demand rises with belief), so a type
    is equilibrium-dominated at P iff its belief-1 payoff falls short of its
    equilibrium profit.
    """
    if not cert.pbe_pass:
        raise ValueError("intuitive criterion needs a certificate that passed verification")
    profile = cert.profile
    ceiling = demand_ceiling(params)
    c_B = params.c_B
    witness = None
    dominated = {}
    for firm, model in _models(params, profile).items():
        pi_G, pi_B = cert.profits[(firm, "G")], cert.profits[(firm, "B")]
        on_path = set(profile.strategies[firm].market_weights(params.mu0))
        b_dom, g_dom = [], []
        found = []
        for idx in range(params.N + 1):
            if idx in on_path:
                continue
            P = params.price(idx)
            # B always loses at P <= c_B when it earns a positive profit; only the demand-free bound is needed
            if (P - c_B) * ceiling[idx] < pi_B - tol and P * ceiling[idx] <= pi_G + tol:
                b_dom.append(idx)
                continue
            d1 = model.total(idx, 1.0)
            pay_G, pay_B = P * d1, (P - c_B) * d1
            B_dom, G_dom = pay_B < pi_B - tol, pay_G < pi_G - tol
            if B_dom:
                b_dom.append(idx)
            if G_dom:
                g_dom.append(idx)
            if B_dom and not G_dom and pay_G > pi_G + tol:
                found.append((pay_G - pi_G, idx, "B", pay_G, pi_G))
            elif G_dom and not B_dom:
                pay_B0 = (P - c_B) * model.total(idx, 0.0)
                if pay_B0 > pi_B + tol:
                    found.append((pay_B0 - pi_B, idx, "G", pay_B0, pi_B))
        dominated[firm] = tuple(b_dom)
        if found and witness is None:
            gain_, idx, t, pay, pi = max(found, key=lambda x: (x[0], -x[1]))
            dom_set = tuple(b_dom) if t == "B" else tuple(g_dom)
            witness = ICWitness(firm, idx, params.price(idx), t, pay, pi, dom_set)
    if profile.symmetric:
        dominated[1] = dominated[0]
    return ICResult(witness is None, witness, dominated)


def apply_ic(params: MarketParams, cert: EquilibriumCertificate, tol: float = TOL_CMP) -> EquilibriumCertificate:
    r = intuitive_criterion(params, cert, tol)
    cert.ic_pass, cert.ic_witness, cert.b_dominated = r.passed, r.witness, r.b_dominated
    return cert


# -- exhaustive symmetric pure search ----------------------------------------


@dataclass(frozen=True)
class SearchOptions:
    workers: int = 1
    tol_cmp: float = TOL_CMP
    tol_int: float = TOL_INT
    spot_checks: int = 200
    # re-test a rejected candidate with belief 1 at the offending off-path price
    extreme_belief_fallback: bool = True
    pooling: bool = True


def _deviation_order(params: MarketParams, g: int, b: int, extra: tuple[int, ...] = ()) -> list[int]:
    """Grid indices with the likeliest profitable deviations first (neighbours of play, c_B, c_B+)."""
    n = params.N + 1
    k = params.k
    first = [g, b, g - 1, b - 1, k + 1, g + 1, b + 1, *extra, g - 2, b - 2, k]
    first = [i for i in dict.fromkeys(first) if 0 <= i < n]
    seen = set(first)
    return first + [i for i in range(n) if i not in seen]


def screen_candidate(params: MarketParams, g: int, b: int, opts: SearchOptions, ceiling=None, extra=()):
    """Cheap PBE screen of a symmetric pure candidate with belief 0 off path.

    Returns None when some unilateral deviation is profitable, otherwise the
    off-path belief overrides (index -> 1.0) needed to support it.
    """
    profile = Profile.symmetric_pure(params, g, b, 0.0)
    model = DemandModel(params, profile.offers(0, params.mu0), profile.offers(1, params.mu0), opts.tol_int)
    supports = {"G": ((g, 1.0),), "B": ((b, 1.0),)}
    order = _deviation_order(params, g, b, extra)
    overrides: dict[int, float] = {}
    while True:
        beliefs = profile.beliefs[0].with_values(overrides) if overrides else profile.beliefs[0]
        res, hit = scan_firm(
            params, model, supports, lambda t, i: beliefs[i], opts.tol_cmp, early_exit=True, order=order, ceiling=ceiling
        )
        if hit is None:
            return overrides
        on_path = hit in (g, b)
        if on_path or not opts.extreme_belief_fallback or hit in overrides:
            return None
        d1 = model.total(hit, 1.0)
        if any((params.price(hit) - params.cost(t)) * d1 > r.profit + opts.tol_cmp for t, r in res.items()):
            return None
        log.warning("belief 1 deters a deviation that belief 0 does not at idx=%d (candidate %d,%d)", hit, g, b)
        overrides[hit] = 1.0


def _screen_rows(args):
    params, rows, opts = args
    ceiling = demand_ceiling(params)
    extra = (monopoly_index(params, 0.0, params.c_B),)
    out = []
    n = params.N + 1
    for g in rows:
        for b in range(g if opts.pooling else g + 1, n):
            ov = screen_candidate(params, g, b, opts, ceiling, extra)
            if ov is not None:
                out.append((g, b, tuple(sorted(ov.items()))))
    return out


def _parallel_map(fn, tasks, workers: int):
    if workers <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, tasks))


def _row_chunks(n: int, workers: int) -> list[list[int]]:
    # interleave rows so every chunk mixes cheap and expensive P_G values
    nchunks = max(1, workers * 4)
    return [list(range(i, n, nchunks)) for i in range(min(nchunks, n))]


def find_equilibria(params: MarketParams, options: SearchOptions | None = None) -> list[EquilibriumCertificate]:
    """All symmetric pure PBE outcomes (P_G <= P_B) supportable by off-path beliefs, IC-tested.

    Certificates are sorted by (P_G, P_B); `ic_pass` marks the refinement survivors.
    """
    opts = options or SearchOptions()
    n = params.N + 1
    tasks = [(params, rows, opts) for rows in _row_chunks(n, opts.workers)]
    survivors = sorted(x for chunk in _parallel_map(_screen_rows, tasks, opts.workers) for x in chunk)
    if not survivors:
        log.warning("no candidate survived the PBE screen")
        return []
    certs = []
    for g, b, ov in survivors:
        profile = Profile.symmetric_pure(params, g, b, 0.0)
        if ov:
            bel = profile.beliefs[0].with_values(dict(ov))
            profile = Profile(profile.strategies, (bel, bel))
        cert = verify_pbe(params, profile, opts.tol_cmp, opts.spot_checks, tol_int=opts.tol_int)
        if ov:
            cert.notes = (f"belief 1 needed at off-path indices {[i for i, _ in ov]}",)
        if not cert.pbe_pass:
            log.warning("candidate (%d,%d) passed the screen but failed full verification", g, b)
            continue
        certs.append(apply_ic(params, cert, opts.tol_cmp))
    return certs


def default_workers() -> int:
    env = os.environ.get("PRICESIGNAL_WORKERS")
    return int(env) if env else 1
