"""Market primitives: valuation distribution, quality map, parameters and derived constants."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import optimize, special

TOL_CMP = 1e-12
TOL_ROOT = 1e-12
TOL_INT = 1e-9

VALUATION_KINDS = ("uniform", "scaled-beta")
QUALITY_KINDS = ("affine",)


class ParameterError(ValueError):
    """A primitive is malformed (non-finite, negative, wrong kind) or out of domain."""


def _finite(name, value, *, positive=False, nonnegative=False):
    if not isinstance(value, (int, float, np.integer, np.floating)) or not math.isfinite(value):
        raise ParameterError(f"{name}: must be a finite number, got {value!r}")
    if positive and value <= 0:
        raise ParameterError(f"{name}: must be positive, got {value!r}")
    if nonnegative and value < 0:
        raise ParameterError(f"{name}: must be nonnegative, got {value!r}")


@dataclass(frozen=True)
class ValuationDistribution:
    """Consumer valuations on [0, v_max]: uniform, or a beta(alpha, beta) scaled to v_max."""

    kind: str = "uniform"
    v_max: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if self.kind not in VALUATION_KINDS:
            raise ParameterError(f"valuation.kind: unknown kind {self.kind!r}")
        _finite("valuation.v_max", self.v_max, positive=True)
        if self.kind == "scaled-beta":
            _finite("valuation.alpha", self.alpha, positive=True)
            _finite("valuation.beta", self.beta, positive=True)
            # pdf must stay positive and finite at both ends
            if self.alpha < 1 or self.beta < 1:
                raise ParameterError("valuation.alpha/beta: scaled-beta requires alpha >= 1 and beta >= 1")

    def cdf(self, v):
        if isinstance(v, float):
            x = v / self.v_max
            if x <= 0.0:
                return 0.0
            if x >= 1.0:
                return 1.0
            if self.kind == "uniform":
                return x
            return float(special.betainc(self.alpha, self.beta, x))
        x = np.clip(np.asarray(v, dtype=float) / self.v_max, 0.0, 1.0)
        if self.kind == "uniform":
            return x
        return special.betainc(self.alpha, self.beta, x)

    def sf(self, v):
        """Survival function 1 - F(v), accurate in the far upper tail."""
        x = np.clip(np.asarray(v, dtype=float) / self.v_max, 0.0, 1.0)
        if self.kind == "uniform":
            return 1.0 - x
        return special.betaincc(self.alpha, self.beta, x)

    def pdf(self, v):
        v = np.asarray(v, dtype=float)
        x = v / self.v_max
        inside = (x >= 0.0) & (x <= 1.0)
        if self.kind == "uniform":
            dens = np.ones_like(x)
        else:
            xc = np.clip(x, 0.0, 1.0)
            log_b = special.betaln(self.alpha, self.beta)
            with np.errstate(divide="ignore"):
                dens = np.exp((self.alpha - 1) * np.log(xc) + (self.beta - 1) * np.log1p(-xc) - log_b)
            # alpha == 1 or beta == 1 make 0 * log(0) terms; the limit is the finite endpoint density
            dens = np.where(np.isfinite(dens), dens, 0.0)
        return np.where(inside, dens / self.v_max, 0.0)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "uniform":
            return rng.uniform(0.0, self.v_max, size)
        return self.v_max * rng.beta(self.alpha, self.beta, size)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "v_max": self.v_max}
        if self.kind == "scaled-beta":
            d.update(alpha=self.alpha, beta=self.beta)
        return d


@dataclass(frozen=True)
class QualityMap:
    """Valuation of the good type's product, h(v) = intercept + slope * v."""

    intercept: float
    slope: float
    kind: str = "affine"

    def __post_init__(self):
        if self.kind not in QUALITY_KINDS:
            raise ParameterError(f"quality.kind: unknown kind {self.kind!r}")
        _finite("quality.intercept", self.intercept, nonnegative=True)
        _finite("quality.slope", self.slope, positive=True)

    def __call__(self, v):
        return self.intercept + self.slope * v

    def inverse(self, x):
        """Unclamped inverse; callers clamp through the cdf."""
        return (x - self.intercept) / self.slope

    def mix_line(self, belief: float) -> tuple[float, float]:
        """(intercept, slope) of v -> belief*h(v) + (1-belief)*v."""
        return belief * self.intercept, 1.0 + belief * (self.slope - 1.0)

    def mix_inverse(self, belief, x):
        """Solve belief*h(v) + (1-belief)*v = x for v (the map is strictly increasing)."""
        a, s = self.mix_line(belief)
        return (x - a) / s

    def check(self, v_max: float, n: int = 10_000) -> list[str]:
        """Grid checks of h(v) >= v and slope > 1 on [0, v_max]; returns failure messages."""
        v = np.linspace(0.0, v_max, n)
        hv = self(v)
        problems = []
        if np.any(hv < v - TOL_CMP):
            problems.append("h(v) >= v")
        if np.any(np.diff(hv) / np.diff(v) <= 1.0):
            problems.append("h' > 1")
        if not math.isfinite(float(self(v_max))):
            problems.append("h(vbar) finite")
        return problems

    def to_dict(self) -> dict:
        return {"kind": self.kind, "intercept": self.intercept, "slope": self.slope}


@dataclass(frozen=True)
class PriceGrid:
    """Prices {0, m, ..., (count-1)*m}; indices are the exact representation."""

    unit: float
    count: int

    def price(self, idx):
        return idx * self.unit

    @property
    def prices(self) -> np.ndarray:
        return np.arange(self.count) * self.unit

    def index(self, price: float) -> int:
        idx = round(price / self.unit)
        if abs(idx * self.unit - price) > 1e-9 * max(1.0, abs(price)) or not 0 <= idx < self.count:
            raise ParameterError(f"price {price!r} is not on the grid")
        return int(idx)

    def __len__(self):
        return self.count


@dataclass(frozen=True)
class MarketParams:
    mu0: float
    m: float
    k: int
    N: int
    c_learn: float
    F: ValuationDistribution = field(default_factory=ValuationDistribution)
    h: QualityMap = field(default_factory=lambda: QualityMap(0.2, 3.0))

    def __post_init__(self):
        _finite("mu0", self.mu0)
        _finite("m", self.m, positive=True)
        _finite("c_learn", self.c_learn, nonnegative=True)
        for name in ("k", "N"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
                raise ParameterError(f"{name}: must be a positive integer, got {value!r}")
        if self.k > self.N:
            raise ParameterError(f"k: must not exceed N ({self.k} > {self.N})")

    @property
    def vbar(self) -> float:
        return self.F.v_max

    @property
    def c_B(self) -> float:
        return self.k * self.m

    @property
    def c_B_plus(self) -> float:
        return (self.k + 1) * self.m

    @property
    def grid(self) -> PriceGrid:
        return PriceGrid(self.m, self.N + 1)

    def price(self, idx):
        return idx * self.m

    def cost(self, type_: str) -> float:
        return 0.0 if type_ == "G" else self.c_B

    @cached_property
    def m_star(self) -> float:
        return m_star(self)

    @cached_property
    def monopoly_G(self) -> float:
        return monopoly_price(self, 1.0, 0.0)

    def replace(self, **changes) -> "MarketParams":
        d = dict(mu0=self.mu0, m=self.m, k=self.k, N=self.N, c_learn=self.c_learn, F=self.F, h=self.h)
        d.update(changes)
        return MarketParams(**d)

    def to_dict(self) -> dict:
        return {
            "mu0": self.mu0,
            "m": self.m,
            "k": self.k,
            "N": self.N,
            "c_learn": self.c_learn,
            "valuation": self.F.to_dict(),
            "quality": self.h.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MarketParams":
        known = {"mu0", "m", "k", "N", "c_learn", "valuation", "quality"}
        extra = set(d) - known
        if extra:
            raise ParameterError(f"{sorted(extra)[0]}: unknown field")
        try:
            val, qual = d["valuation"], d["quality"]
            for name, obj, allowed in (
                ("valuation", val, {"kind", "v_max", "alpha", "beta"}),
                ("quality", qual, {"kind", "intercept", "slope"}),
            ):
                bad = set(obj) - allowed
                if bad:
                    raise ParameterError(f"{name}.{sorted(bad)[0]}: unknown field")
            kind = val.get("kind", "uniform")
            if "v_max" not in val:
                raise ParameterError("valuation.v_max: missing field")
            if kind == "scaled-beta":
                for key in ("alpha", "beta"):
                    if key not in val:
                        raise ParameterError(f"valuation.{key}: missing field")
            F = ValuationDistribution(
                kind=kind, v_max=val["v_max"], alpha=val.get("alpha", 1.0), beta=val.get("beta", 1.0)
            )
            h = QualityMap(intercept=qual["intercept"], slope=qual["slope"], kind=qual.get("kind", "affine"))
            return cls(mu0=d["mu0"], m=d["m"], k=d["k"], N=d["N"], c_learn=d["c_learn"], F=F, h=h)
        except KeyError as exc:
            raise ParameterError(f"{exc.args[0]}: missing field") from None
        except (TypeError, AttributeError) as exc:
            raise ParameterError(f"malformed market object: {exc}") from None


def c1() -> MarketParams:
    """Reference market: uniform valuations on [0, 1], h(v) = 0.2 + 3v, c_B = 0.2 on a 0.01 grid."""
    return MarketParams(
        mu0=0.5, m=0.01, k=20, N=320, c_learn=0.05, F=ValuationDistribution("uniform", 1.0), h=QualityMap(0.2, 3.0)
    )


# -- derived quantities ------------------------------------------------------


def v_of_x(params: MarketParams, x: float) -> float:
    """Valuation whose prior-weighted willingness to pay mu0*h(v) + (1-mu0)*v equals x."""
    lo = params.mu0 * params.h(0.0)
    hi = params.mu0 * params.h(params.vbar) + (1 - params.mu0) * params.vbar
    if not lo - TOL_ROOT <= x <= hi + TOL_ROOT:
        raise ParameterError(f"x={x!r} outside [{lo}, {hi}]")
    return float(min(max(params.h.mix_inverse(params.mu0, x), 0.0), params.vbar))


def _demand_ratio_gap(params: MarketParams, x):
    F, h, mu0 = params.F, params.h, params.mu0
    num = F.sf(h.inverse(x))
    den = F.sf(h.mix_inverse(mu0, x))
    if np.any(np.asarray(den) <= 0):
        raise ParameterError("m*: demand at the prior belief vanishes inside the range")
    return x * (num / den - 1.0)


def m_star(params: MarketParams, n_grid: int = 100_000) -> float:
    """Lower bound on x*(D(belief 1)/D(belief mu0) - 1) over x in [c_B, xmax - m].

    Dense grid followed by a bounded scalar minimisation around the best grid point.
    """
    lo = params.c_B
    hi = params.mu0 * params.h(params.vbar) + (1 - params.mu0) * params.vbar - params.m
    if hi <= lo:
        raise ParameterError("m*: empty minimisation range")
    xs = np.linspace(lo, hi, n_grid)
    g = _demand_ratio_gap(params, xs)
    j = int(np.argmin(g))
    best = float(g[j])
    a, b = xs[max(j - 1, 0)], xs[min(j + 1, n_grid - 1)]
    res = optimize.minimize_scalar(
        lambda x: float(_demand_ratio_gap(params, x)), bounds=(a, b), method="bounded", options={"xatol": 1e-14}
    )
    if res.success and res.fun < best:
        best = float(res.fun)
    return best


def monopoly_index(params: MarketParams, belief: float, cost: float, tol: float = TOL_CMP) -> int:
    """Grid index maximising (P - cost) * (1 - F(v*(P))); ties go to the lower price."""
    P = params.grid.prices
    v = np.clip(params.h.mix_inverse(belief, P), 0.0, params.vbar)
    profit = (P - cost) * (1.0 - params.F.cdf(v))
    best = profit.max()
    return int(np.flatnonzero(profit >= best - tol)[0])


def monopoly_price(params: MarketParams, belief: float, cost: float) -> float:
    return params.price(monopoly_index(params, belief, cost))


# -- assumption checks -------------------------------------------------------


@dataclass(frozen=True)
class Check:
    name: str
    lhs: float
    rhs: float
    relation: str
    passed: bool
    demoted: bool = False

    def line(self) -> str:
        status = "pass" if self.passed else ("warn" if self.demoted else "FAIL")
        return f"{status:4s}  {self.name:40s} {self.lhs:.10g} {self.relation} {self.rhs:.10g}"


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[Check, ...]
    m_star: float
    monopoly_G: float

    @property
    def passed(self) -> bool:
        return all(c.passed or c.demoted for c in self.checks)

    @property
    def failures(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed and not c.demoted]

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def table(self) -> str:
        return "\n".join(c.line() for c in self.checks)


MONOTONE_CHECK = "monopoly profit increasing on [0, c_B+]"
M_STAR_CHECK = "m < m*"


def _monotone_margin(params: MarketParams, n: int = 10_000) -> float:
    P = np.linspace(0.0, params.c_B_plus, n)
    prof = P * (1.0 - params.F.cdf(params.h.inverse(P)))
    return float(np.min(np.diff(prof)))


def validate(params: MarketParams, demote: tuple[str, ...] = ()) -> ValidationReport:
    """Evaluate every modelling assumption; `demote` turns named checks into warnings."""
    p = params
    h, vbar, cB, m = p.h, p.vbar, p.c_B, p.m
    rows = [
        ("0 < mu0 < 1", p.mu0, 0.0, "in (0,1)", 0.0 < p.mu0 < 1.0),
        ("c_B > 0", cB, 0.0, ">", cB > 0),
        ("vbar > c_B", vbar, cB, ">", vbar > cB),
        ("c_B >= h(0) - m", cB, h(0.0) - m, ">=", cB >= h(0.0) - m - TOL_CMP),
        ("N*m >= h(vbar)", p.N * m, h(vbar), ">=", p.N * m >= h(vbar) - TOL_CMP),
        (
            "c_learn <= mu0*(h(c_B+) - c_B)",
            p.c_learn,
            p.mu0 * (h(p.c_B_plus) - cB),
            "<=",
            p.c_learn <= p.mu0 * (h(p.c_B_plus) - cB) + TOL_CMP,
        ),
        ("m < c_learn", m, p.c_learn, "<", m < p.c_learn),
    ]
    if p.mu0 < 1:
        bound = p.mu0 * cB / (1 - p.mu0)
        rows.append(("m < mu0*c_B/(1-mu0)", m, bound, "<", m < bound))
    rows.append(("m < vbar - c_B", m, vbar - cB, "<", m < vbar - cB))
    for problem in h.check(vbar):
        rows.append((f"quality map: {problem}", 0.0, 0.0, "holds", False))
    margin = _monotone_margin(p)
    rows.append((MONOTONE_CHECK, margin, 0.0, ">", margin > 0))
    try:
        ms = p.m_star
    except ParameterError:
        ms = float("nan")
    rows.append((M_STAR_CHECK, m, ms, "<", bool(m < ms)))
    try:
        pgm = p.monopoly_G
    except Exception:  # pragma: no cover - only with a broken grid
        pgm = float("nan")
    checks = tuple(Check(n, float(l), float(r), rel, bool(ok), n in demote) for n, l, r, rel, ok in rows)
    return ValidationReport(checks, ms, pgm)


def random_valid_params(rng: np.random.Generator, max_N: int = 200, tries: int = 500) -> MarketParams:
    """Draw a market that passes every check in `validate`, with at most max_N + 1 grid prices.

    Rejection sampling over prior, quality map, valuation shape and grid; m is
    c_B / k for the smallest k that keeps m below m*.
    """
    for _ in range(tries):
        mu0 = float(rng.uniform(0.3, 0.7))
        a = float(rng.uniform(0.05, 0.3))
        s = float(rng.uniform(1.5, 4.0))
        v_max = float(rng.uniform(0.8, 1.5))
        if rng.random() < 0.5:
            F = ValuationDistribution("uniform", v_max)
        else:
            F = ValuationDistribution("scaled-beta", v_max, float(rng.uniform(1.0, 2.5)), float(rng.uniform(1.0, 2.5)))
        h = QualityMap(a, s)
        c_B = round(a + float(rng.uniform(0.0, 0.1)), 4)
        k_max = 40
        probe = MarketParams(mu0=mu0, m=c_B / k_max, k=k_max, N=int(math.ceil(h(v_max) * k_max / c_B)) + 1,
                             c_learn=1.0, F=F, h=h)
        try:
            ms = m_star(probe, n_grid=20_000)  # widest range, so a lower bound for every coarser grid
        except ParameterError:
            continue
        if _monotone_margin(probe) <= 0 or not ms > 0:
            continue
        k = max(4, int(math.floor(c_B / ms)) + 1)
        m = c_B / k
        N = int(math.ceil(h(v_max) / m - 1e-9))
        hi = mu0 * (h(c_B + m) - c_B)
        lo = max(1.5 * m, 0.02)
        if N > max_N or hi <= lo:
            continue
        p = MarketParams(mu0=mu0, m=m, k=k, N=N, c_learn=float(rng.uniform(lo, hi)), F=F, h=h)
        if validate(p).passed:
            return p
    raise ParameterError("could not draw a valid parameter set")
