"""Posteriors, gains from trade and the consumer's two-stage decision rules.

Every gain w(v, belief, P) is affine in v, so the learning value
L(v) = sum_k q_k * max{0, w_own(v), w_k(v)} - c_learn is convex and piecewise
affine with kinks where two of the basic lines cross.  `stage1_partition`
exploits this to split [0, vbar] into intervals of constant decision exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from typing import NamedTuple

import numpy as np

from .market import TOL_CMP, MarketParams


class StageOne(Enum):
    BUY = "buy"
    LEARN = "learn"
    LEAVE = "leave"


class StageTwo(Enum):
    BUY_ASSIGNED = "buy_assigned"
    BUY_OTHER = "buy_other"
    LEAVE = "leave"


class StructuralError(RuntimeError):
    """Stage-one behaviour is not of threshold form where one was required."""


class Offer(NamedTuple):
    """One atom of a firm's price distribution as consumers anticipate it."""

    weight: float
    idx: int
    belief: float


Line = tuple[float, float]  # (intercept, slope) of an affine function of v
ZERO: Line = (0.0, 0.0)


# -- strategies and beliefs --------------------------------------------------


def _atoms(dist) -> tuple[tuple[int, float], ...]:
    if isinstance(dist, (int, np.integer)):
        return ((int(dist), 1.0),)
    items = dist.items() if isinstance(dist, dict) else dist
    out = {}
    for idx, p in items:
        if p < 0:
            raise ValueError(f"negative probability {p} at index {idx}")
        if p > 0:
            out[int(idx)] = out.get(int(idx), 0.0) + float(p)
    return tuple(sorted(out.items()))


@dataclass(frozen=True)
class FirmStrategy:
    """Price distributions (grid index -> probability) of the good and bad type."""

    good: tuple[tuple[int, float], ...]
    bad: tuple[tuple[int, float], ...]

    def __init__(self, good, bad):
        object.__setattr__(self, "good", _atoms(good))
        object.__setattr__(self, "bad", _atoms(bad))
        for name, atoms in (("good", self.good), ("bad", self.bad)):
            total = sum(p for _, p in atoms)
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"{name}-type distribution sums to {total}, not 1")

    @classmethod
    def pure(cls, good_idx: int, bad_idx: int) -> "FirmStrategy":
        return cls(good_idx, bad_idx)

    def dist(self, type_: str):
        return self.good if type_ == "G" else self.bad

    def prob(self, type_: str, idx: int) -> float:
        return dict(self.dist(type_)).get(idx, 0.0)

    def support(self, type_: str) -> tuple[int, ...]:
        return tuple(i for i, _ in self.dist(type_))

    def market_weights(self, mu0: float) -> dict[int, float]:
        """Unconditional probability of each price: mu0*sigma(G)(P) + (1-mu0)*sigma(B)(P)."""
        q: dict[int, float] = {}
        for idx, p in self.good:
            q[idx] = q.get(idx, 0.0) + mu0 * p
        for idx, p in self.bad:
            q[idx] = q.get(idx, 0.0) + (1 - mu0) * p
        return dict(sorted(q.items()))

    def to_dict(self) -> dict:
        return {"G": {str(i): p for i, p in self.good}, "B": {str(i): p for i, p in self.bad}}


class BeliefSystem:
    """Probability of the good type at every grid price of one firm (explicit off path too)."""

    __slots__ = ("values",)

    def __init__(self, values):
        arr = np.array(values, dtype=float)
        if arr.ndim != 1 or np.any(arr < 0) or np.any(arr > 1) or not np.all(np.isfinite(arr)):
            raise ValueError("beliefs must be a vector of probabilities")
        arr.setflags(write=False)
        self.values = arr

    def __getitem__(self, idx):
        return float(self.values[idx])

    def __len__(self):
        return len(self.values)

    def __eq__(self, other):
        return isinstance(other, BeliefSystem) and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash(self.values.tobytes())

    def __repr__(self):
        return f"BeliefSystem(n={len(self)})"

    @classmethod
    def constant(cls, n: int, value: float) -> "BeliefSystem":
        return cls(np.full(n, float(value)))

    @classmethod
    def threshold(cls, n: int, last_good_idx: int) -> "BeliefSystem":
        """Belief 1 at indices <= last_good_idx, 0 above."""
        return cls((np.arange(n) <= last_good_idx).astype(float))

    @classmethod
    def consistent(cls, mu0: float, strategy: FirmStrategy, n: int, off_path=0.0) -> "BeliefSystem":
        """Bayes' rule on path; `off_path` (scalar or vector) elsewhere."""
        vals = np.broadcast_to(np.asarray(off_path, dtype=float), (n,)).copy()
        for idx in strategy.market_weights(mu0):
            vals[idx] = posterior(mu0, strategy, idx)
        return cls(vals)

    def with_values(self, updates: dict[int, float]) -> "BeliefSystem":
        vals = self.values.copy()
        for idx, b in updates.items():
            vals[idx] = b
        return BeliefSystem(vals)

    def is_consistent(self, mu0: float, strategy: FirmStrategy, tol: float = TOL_CMP) -> bool:
        for idx in strategy.market_weights(mu0):
            if abs(self.values[idx] - posterior(mu0, strategy, idx)) > tol:
                return False
        return True


def posterior(mu0: float, strategy: FirmStrategy, idx: int) -> float | None:
    """Bayes posterior of the good type after price index `idx`; None off path."""
    g = mu0 * strategy.prob("G", idx)
    den = g + (1 - mu0) * strategy.prob("B", idx)
    if den <= 0:
        return None
    return g / den


def offers(mu0: float, strategy: FirmStrategy, beliefs: BeliefSystem) -> tuple[Offer, ...]:
    """A firm's price distribution with the belief consumers attach to each price."""
    return tuple(Offer(q, idx, beliefs[idx]) for idx, q in strategy.market_weights(mu0).items())


# -- gains and decision rules ------------------------------------------------


def gain(params: MarketParams, v, belief: float, price: float):
    """w(v, belief, P) = belief*h(v) + (1-belief)*v - P."""
    return belief * params.h(v) + (1 - belief) * v - price


def gain_line(params: MarketParams, belief: float, idx: int) -> Line:
    a, s = params.h.mix_line(belief)
    return a - idx * params.m, s


def _at(line: Line, v: float) -> float:
    return line[0] + line[1] * v


def choose_stage1(w_own: float, learn: float) -> StageOne:
    """Learn on a weak preference (buy-vs-learn indifference resolves to learning)."""
    if w_own <= learn and learn >= 0:
        return StageOne.LEARN
    if w_own > max(0.0, learn):
        return StageOne.BUY
    return StageOne.LEAVE


def choose_stage2(w_assigned: float, w_other: float) -> StageTwo:
    """Switching needs a strict gain; ties stay with the assigned firm."""
    if w_assigned >= 0 and w_assigned >= w_other:
        return StageTwo.BUY_ASSIGNED
    if w_other >= 0 and w_other > w_assigned:
        return StageTwo.BUY_OTHER
    return StageTwo.LEAVE


def _learn_from_lines(v: float, w_own: float, weighted: list[tuple[float, Line]], c_learn: float) -> float:
    total = 0.0
    for q, line in weighted:
        total += q * max(0.0, w_own, _at(line, v))
    return total - c_learn


def learn_value(
    params: MarketParams, v: float, w_own: float, opponent: FirmStrategy, opponent_beliefs: BeliefSystem
) -> float:
    """Expected best option after learning the other firm's price, net of the learning cost."""
    total = 0.0
    for q, idx, b in offers(params.mu0, opponent, opponent_beliefs):
        total += q * max(0.0, w_own, gain(params, v, b, params.price(idx)))
    return total - params.c_learn


def stage1(
    params: MarketParams,
    v: float,
    own_idx: int,
    own_belief: float,
    opponent: FirmStrategy,
    opponent_beliefs: BeliefSystem,
) -> StageOne:
    w_own = gain(params, v, own_belief, params.price(own_idx))
    return choose_stage1(w_own, learn_value(params, v, w_own, opponent, opponent_beliefs))


def stage2(params: MarketParams, v: float, own_idx: int, own_belief: float, other_idx: int, other_belief: float):
    return choose_stage2(
        gain(params, v, own_belief, params.price(own_idx)), gain(params, v, other_belief, params.price(other_idx))
    )


# -- exact partition of the valuation line -----------------------------------


def _crossings(lines, lo: float, hi: float) -> list[float]:
    pts = {lo, hi}
    for (a1, s1), (a2, s2) in combinations(set(lines), 2):
        if s1 != s2:
            x = (a2 - a1) / (s1 - s2)
            if lo < x < hi:
                pts.add(x)
    return sorted(pts)


def stage1_partition(
    own: Line, weighted: list[tuple[float, Line]], c_learn: float, vbar: float, extra: tuple[Line, ...] = ()
) -> list[tuple[float, float, StageOne]]:
    """Split [0, vbar] into maximal intervals of constant stage-one decision.

    Interval ends include every crossing of the lines {0, own, offers, *extra},
    so any stage-two comparison among those lines is also constant inside.
    """
    lines = [ZERO, own, *(l for _, l in weighted), *extra]
    pts = _crossings(lines, 0.0, vbar)
    cuts = list(pts)
    for a, b in zip(pts, pts[1:]):
        La = _learn_from_lines(a, _at(own, a), weighted, c_learn)
        Lb = _learn_from_lines(b, _at(own, b), weighted, c_learn)
        # L and own - L are affine on (a, b)
        for ga, gb in ((La, Lb), (_at(own, a) - La, _at(own, b) - Lb)):
            if (ga < 0 < gb) or (gb < 0 < ga):
                cuts.append(a + (b - a) * ga / (ga - gb))
    cuts = sorted(set(cuts))
    out: list[tuple[float, float, StageOne]] = []
    for a, b in zip(cuts, cuts[1:]):
        if b <= a:
            continue
        mid = 0.5 * (a + b)
        w = _at(own, mid)
        d = choose_stage1(w, _learn_from_lines(mid, w, weighted, c_learn))
        out.append((a, b, d))
    return out


def merge_partition(parts):
    merged: list[list] = []
    for a, b, d in parts:
        if merged and merged[-1][2] == d:
            merged[-1][1] = b
        else:
            merged.append([a, b, d])
    return [tuple(x) for x in merged]


def learning_cutoff(
    params: MarketParams,
    own_idx: int,
    own_belief: float,
    opponent: FirmStrategy,
    opponent_beliefs: BeliefSystem,
) -> float:
    """Valuation above which consumers at this price learn; vbar if nobody learns.

    Raises StructuralError when the learning set is not an upper tail of [0, vbar].
    """
    own = gain_line(params, own_belief, own_idx)
    weighted = [(o.weight, gain_line(params, o.belief, o.idx)) for o in offers(params.mu0, opponent, opponent_beliefs)]
    parts = merge_partition(stage1_partition(own, weighted, params.c_learn, params.vbar))
    learn = [(a, b) for a, b, d in parts if d is StageOne.LEARN]
    if not learn:
        return params.vbar
    if len(learn) > 1 or learn[0][1] < params.vbar:
        raise StructuralError(f"learning set {learn} is not an upper tail")
    return learn[0][0]
