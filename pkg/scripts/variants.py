"""Comparison markets on the reference primitives: observable types, one-type Diamond, low good-type monopoly price."""

from __future__ import annotations

import argparse

import numpy as np

from pricesignal.consumer import learning_cutoff
from pricesignal.demand import good_type_low_price_profit
from pricesignal.equilibrium import SearchOptions, default_workers
from pricesignal.market import QualityMap, ValuationDistribution, c1
from pricesignal.variants import diamond_baseline, low_monopoly_variant, observable_equilibria


def _low_markets(p):
    yield "P_G^m < c_B", p.replace(F=ValuationDistribution("scaled-beta", 1.0, 1.0, 10.0), h=QualityMap(0.05, 1.5), N=156)
    yield "P_G^m = c_B", p.replace(F=ValuationDistribution("uniform", 0.3), h=QualityMap(0.04, 1.2), N=40, c_learn=0.04)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--workers", type=int, default=default_workers())
    ap.add_argument("--skip-observable", action="store_true", help="skip the full-grid observable search")
    args = ap.parse_args()
    opts = SearchOptions(workers=args.workers)
    p = c1()

    print("one-type market")
    print("  good type:", [p.price(c.g) for c in diamond_baseline(p, True)], " monopoly", p.monopoly_G)
    print("  bad type: ", [p.price(c.b) for c in diamond_baseline(p, False)])

    if not args.skip_observable:
        r = observable_equilibria(p, opts)
        print(f"observable types: bound {r.bound:.4f}, holds {r.bound_ok}")
        for c in r.certificates:
            print(f"  P_G={p.price(c.g):.2f} P_B={p.price(c.b):.2f} pi_G={c.profits[(0, 'G')]:.6f}")

    for label, q in _low_markets(p):
        r = low_monopoly_variant(q, opts)
        print(f"low monopoly price ({label}): P_G^m={r.monopoly_G:.2f} min(P_G^m, c_B)={r.target_G:.2f}")
        for c in r.certificates:
            if not c.ic_pass:
                continue
            g, b = c.prices()
            v01 = learning_cutoff(q, b, 0.0, c.profile.strategies[1], c.profile.beliefs[1])
            best = int(np.argmax([good_type_low_price_profit(q, i, v01) for i in range(q.k + 1)]))
            print(
                f"  P_G={q.price(g):.2f} P_B={q.price(b):.2f} pi_B={c.profits[(0, 'B')]:.6f}"
                f"  closed-form G optimum below c_B: {q.price(best):.2f}"
            )


if __name__ == "__main__":
    main()
