"""Comparison markets: observable types, the one-type Diamond market and low good-type monopoly prices."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum

from .demand import DemandModel
from .equilibrium import (
    SearchOptions,
    _deviation_order,
    _parallel_map,
    _row_chunks,
    demand_ceiling,
    find_equilibria,
    scan_firm,
)
from .market import MONOTONE_CHECK, TOL_CMP, MarketParams, ParameterError, monopoly_index, validate

log = logging.getLogger(__name__)


class VariantSpec(Enum):
    OBSERVABLE = "observable"
    DIAMOND = "diamond"
    LOW_MONOPOLY = "low-monopoly"


@dataclass
class VariantCertificate:
    """Symmetric pure outcome of a variant market; mirrors the fields of EquilibriumCertificate used in tables."""

    g: int | None
    b: int | None
    profits: dict[tuple[int, str], float]
    demands: dict[tuple[int, str], float]
    gaps: dict[tuple[int, str], float]
    witnesses: dict[tuple[int, str], int | None]
    pbe_pass: bool
    ic_pass: bool | None = None
    ic_witness: None = None
    notes: tuple[str, ...] = ()

    def prices(self, firm: int = 0) -> tuple[int | None, int | None]:
        return self.g, self.b


def _symmetric_fill(res) -> tuple[dict, dict, dict, dict]:
    profits, demands, gaps, witnesses = {}, {}, {}, {}
    for f in (0, 1):
        for t, r in res.items():
            profits[(f, t)] = r.profit
            demands[(f, t)] = r.demand
            gaps[(f, t)] = r.gap
            witnesses[(f, t)] = r.witness
    return profits, demands, gaps, witnesses


# -- observable types --------------------------------------------------------


def _observable_belief(t: str, idx: int) -> float:
    return 1.0 if t == "G" else 0.0


def _observable_model(params: MarketParams, g: int, b: int) -> DemandModel:
    offs = ((params.mu0, g, 1.0), (1 - params.mu0, b, 0.0))
    return DemandModel(params, offs, offs)


def observable_certificate(params: MarketParams, g: int, b: int, tol: float = TOL_CMP) -> VariantCertificate:
    """Full deviation scan of the symmetric pure profile (g, b) when consumers see the type."""
    model = _observable_model(params, g, b)
    supports = {"G": ((g, 1.0),), "B": ((b, 1.0),)}
    res, _ = scan_firm(params, model, supports, _observable_belief, tol)
    profits, demands, gaps, witnesses = _symmetric_fill(res)
    ok = all(x <= tol for x in gaps.values())
    return VariantCertificate(g, b, profits, demands, gaps, witnesses, ok)


def _observable_rows(args):
    params, rows, tol = args
    ceiling = demand_ceiling(params)
    extra = (monopoly_index(params, 0.0, params.c_B), monopoly_index(params, 1.0, 0.0))
    n = params.N + 1
    out = []
    for g in rows:
        for b in range(n):
            model = _observable_model(params, g, b)
            supports = {"G": ((g, 1.0),), "B": ((b, 1.0),)}
            order = _deviation_order(params, g, b, extra)
            _, hit = scan_firm(params, model, supports, _observable_belief, tol, True, order, ceiling)
            if hit is None:
                out.append((g, b))
    return out


def observable_bound(params: MarketParams) -> float:
    """Lower bound on the good type's price when types are observable: min{P_G^m, h(c_B+) - m}."""
    return min(params.monopoly_G, params.h(params.c_B_plus) - params.m)


@dataclass
class ObservableResult:
    certificates: list[VariantCertificate]
    bound: float
    bound_ok: bool
    violations: list[tuple[int, int]] = field(default_factory=list)


def observable_equilibria(params: MarketParams, options: SearchOptions | None = None) -> ObservableResult:
    """All symmetric pure equilibria with observable types over the full (P_G, P_B) grid.

    Beliefs are type indicators, so no refinement applies. Every survivor is
    checked against the good-type price bound.
    """
    opts = options or SearchOptions()
    tasks = [(params, rows, opts.tol_cmp) for rows in _row_chunks(params.N + 1, opts.workers)]
    found = sorted(x for chunk in _parallel_map(_observable_rows, tasks, opts.workers) for x in chunk)
    certs = []
    for g, b in found:
        cert = observable_certificate(params, g, b, opts.tol_cmp)
        if not cert.pbe_pass:
            log.warning("observable candidate (%d,%d) passed the screen but failed the full scan", g, b)
            continue
        certs.append(cert)
    bound = observable_bound(params)
    bad = [(c.g, c.b) for c in certs if params.price(c.g) < bound - TOL_CMP]
    if not certs:
        log.warning("no observable-types equilibrium found")
    return ObservableResult(certs, bound, not bad, bad)


# -- one-type Diamond market ---------------------------------------------------


def diamond_certificate(params: MarketParams, idx: int, good: bool = True, tol: float = TOL_CMP) -> VariantCertificate:
    t = "G" if good else "B"
    belief = 1.0 if good else 0.0
    model = DemandModel(params, ((1.0, idx, belief),), ((1.0, idx, belief),))
    res, _ = scan_firm(params, model, {t: ((idx, 1.0),)}, lambda _t, _i: belief, tol)
    profits, demands, gaps, witnesses = _symmetric_fill(res)
    ok = all(x <= tol for x in gaps.values())
    g, b = (idx, None) if good else (None, idx)
    return VariantCertificate(g, b, profits, demands, gaps, witnesses, ok)


def diamond_baseline(params: MarketParams, good: bool = True, tol: float = TOL_CMP) -> list[VariantCertificate]:
    """Symmetric pure equilibria of a market where both firms are the same known type.

    good=True uses quality h at cost 0; good=False uses the plain product at cost c_B.
    """
    if not params.m < params.c_learn:
        raise ParameterError("c_learn: the one-type market needs m < c_learn")
    ceiling = demand_ceiling(params)
    t = "G" if good else "B"
    belief = 1.0 if good else 0.0
    out = []
    for idx in range(params.N + 1):
        model = DemandModel(params, ((1.0, idx, belief),), ((1.0, idx, belief),))
        order = _deviation_order(params, idx, idx)
        _, hit = scan_firm(params, model, {t: ((idx, 1.0),)}, lambda _t, _i: belief, tol, True, order, ceiling)
        if hit is None:
            out.append(diamond_certificate(params, idx, good, tol))
    return [c for c in out if c.pbe_pass]


# -- good-type monopoly price at or below c_B ---------------------------------


@dataclass
class LowMonopolyResult:
    certificates: list
    monopoly_G: float
    target_G: float
    demoted: tuple[str, ...]


def low_monopoly_variant(params: MarketParams, options: SearchOptions | None = None) -> LowMonopolyResult:
    """Unobservable-type search with the monotone-monopoly-profit assumption relaxed to a warning."""
    report = validate(params, demote=(MONOTONE_CHECK,))
    if not report.passed:
        raise ParameterError(f"low-monopoly parameters fail: {', '.join(report.failures)}")
    if report[MONOTONE_CHECK].passed:
        log.info("monopoly profit is increasing up to c_B+ here; the variant coincides with the base game")
    certs = find_equilibria(params, options)
    pm = report.monopoly_G
    return LowMonopolyResult(certs, pm, min(pm, params.c_B), (MONOTONE_CHECK,))


def run_variant(params: MarketParams, spec: VariantSpec | str, options: SearchOptions | None = None):
    spec = VariantSpec(spec)
    if spec is VariantSpec.OBSERVABLE:
        return observable_equilibria(params, options).certificates
    if spec is VariantSpec.DIAMOND:
        return diamond_baseline(params, True) + diamond_baseline(params, False)
    return low_monopoly_variant(params, options).certificates

