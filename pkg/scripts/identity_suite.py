"""Curvature identity residuals for the conformal fixture across dimensions and resolutions.

    python scripts/identity_suite.py --dims 2 3 --points 16 32 64
    python scripts/identity_suite.py --dims 4 --points 16 20 --no-algebraic
"""

import argparse
import json
import math
import time

from ricciforms.curvature import streamed_identity_residuals
from ricciforms.grid import GridSpec
from ricciforms.scenarios import conformal_perturbation


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dims", type=int, nargs="+", default=[2, 3])
    ap.add_argument("--points", type=int, nargs="+", default=[16, 32])
    ap.add_argument("--eps", type=float, default=0.1)
    ap.add_argument("--width", type=int, default=4, help="slab width along the first axis")
    ap.add_argument("--no-algebraic", action="store_true")
    ap.add_argument("--no-differential", action="store_true")
    ap.add_argument("--json", help="write all residuals to this file")
    args = ap.parse_args(argv)

    table = {}
    for dim in args.dims:
        prev = None
        for n in args.points:
            grid = GridSpec.uniform(dim, n)
            g = conformal_perturbation(grid, {"eps": args.eps}, 0)
            t0 = time.perf_counter()
            res = streamed_identity_residuals(
                g, grid, width=min(args.width, n),
                algebraic=not args.no_algebraic, differential=not args.no_differential,
            )
            dt = time.perf_counter() - t0
            table[f"{dim}d_N{n}"] = res
            print(f"n={dim} N={n} ({dt:.1f} s)")
            for k, v in res.items():
                order = ""
                if prev and prev[1].get(k, 0) > 1e-10 and v > 1e-10:
                    order = f"  order {math.log(prev[1][k] / v) / math.log(n / prev[0]):.2f}"
                print(f"  {k:28s} {v:.3e}{order}")
            prev = (n, res)
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(table, fh, indent=2)


if __name__ == "__main__":
    main()
