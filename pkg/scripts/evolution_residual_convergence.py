"""Spatial convergence of the |xi|^2 evolution residual under the coupled flow.

Runs the same short flow on several grids and fits the order of the largest
residual over the trajectory.

    python scripts/evolution_residual_convergence.py --points 16 24 32
"""

import argparse
import math
import time

import numpy as np

from ricciforms.config import load_config
from ricciforms.experiment import run_experiment

TEMPLATE = """
[grid]
dim = 3
N = {n}

[scenario]
name = "conformal_perturbation"
eps = {eps}
modes = [1, 1, 1]

[form]
degree = 2
kind = "fourier_mode"
component = [0, 1]
mode = [1, 0, 1]

[run]
t_end = {t_end}
cfl = {cfl}
"""


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, nargs="+", default=[16, 24, 32])
    ap.add_argument("--eps", type=float, default=0.05)
    ap.add_argument("--t-end", type=float, default=3.5e-5)
    ap.add_argument("--cfl", type=float, default=0.2)
    args = ap.parse_args(argv)

    res = []
    for n in args.points:
        cfg = load_config(TEMPLATE.format(n=n, eps=args.eps, t_end=args.t_end, cfl=args.cfl))
        t0 = time.perf_counter()
        out = run_experiment(cfg, write=False)
        r = out.summary["eq7_residual_max"]
        res.append(r)
        print(f"N={n:3d} steps={out.summary['steps']:4d} residual={r:.4e} ({time.perf_counter() - t0:.1f} s)")
    for (n0, r0), (n1, r1) in zip(zip(args.points, res), zip(args.points[1:], res[1:])):
        print(f"order {n0}->{n1}: {math.log(r0 / r1) / math.log(n1 / n0):.2f}")
    if len(res) > 2:
        print(f"fitted order: {-np.polyfit(np.log(args.points), np.log(res), 1)[0]:.2f}")


if __name__ == "__main__":
    main()
