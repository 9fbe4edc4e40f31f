"""Sweep the prior on the reference market and tabulate refinement survivors (writes summary CSV)."""

from __future__ import annotations

import argparse
import csv
from pathlib import Path


from pricesignal.cli import fmt, swept_params
from pricesignal.equilibrium import SearchOptions, default_workers, find_equilibria
from pricesignal.market import c1, validate


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--values", type=float, nargs="+", default=[0.3, 0.4, 0.5, 0.6, 0.7])
    ap.add_argument("--param", default="mu0", choices=["mu0", "c_learn", "m", "k"])
    ap.add_argument("--workers", type=int, default=default_workers())
    ap.add_argument("--out", default="out/prior_sweep.csv")
    args = ap.parse_args()

    rows = []
    for v in args.values:
        p = swept_params(c1(), args.param, v)
        rep = validate(p)
        if not rep.passed:
            rows.append([fmt(v), "", "", "", "", ";".join(rep.failures), fmt(rep.m_star)])
            print(f"{args.param}={v}: skipped ({', '.join(rep.failures)}; m*={rep.m_star:.5f})")
            continue
        certs = find_equilibria(p, SearchOptions(workers=args.workers))
        ic = [c.prices() for c in certs if c.ic_pass]
        pg = ";".join(fmt(p.price(g)) for g, _ in ic)
        pb = ";".join(fmt(p.price(b)) for _, b in ic)
        rows.append([fmt(v), len(certs), len(ic), pg, pb, "", fmt(rep.m_star)])
        print(f"{args.param}={v}: {len(certs)} PBE, IC survivors {[(p.price(g), p.price(b)) for g, b in ic]}")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["value", "n_pbe", "n_ic", "P_G", "P_B", "skipped", "m_star"])
        w.writerows(rows)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
