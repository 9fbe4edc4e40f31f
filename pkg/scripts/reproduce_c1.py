"""Full equilibrium search on the reference market; prints the refinement survivors and writes a CSV."""

from __future__ import annotations

import argparse
import time
from pathlib import Path

from pricesignal.cli import COLUMNS, _csv_text, certificate_rows
from pricesignal.equilibrium import SearchOptions, default_workers, find_equilibria
from pricesignal.market import c1, validate


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--workers", type=int, default=default_workers())
    ap.add_argument("--out", default="out/reproduce_c1")
    args = ap.parse_args()

    p = c1()
    rep = validate(p)
    print(rep.table())
    t0 = time.perf_counter()
    certs = find_equilibria(p, SearchOptions(workers=args.workers))
    dt = time.perf_counter() - t0
    print(f"\n{len(certs)} pure symmetric PBE outcomes in {dt:.1f}s")
    for c in certs:
        if c.ic_pass:
            g, b = c.prices()
            print(
                f"  IC survivor: P_G={p.price(g):.2f} P_B={p.price(b):.2f}"
                f"  pi_G={c.profits[(0, 'G')]:.6f} pi_B={c.profits[(0, 'B')]:.6f}"
            )
        if c.notes:
            print("  note:", c.prices(), c.notes)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "equilibria.csv").write_text(_csv_text(COLUMNS, [r for c in certs for r in certificate_rows(p, c)]))
    print(f"wrote {out / 'equilibria.csv'}")


if __name__ == "__main__":
    main()
