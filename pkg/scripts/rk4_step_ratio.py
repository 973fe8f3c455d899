"""Local error ratio of one RK4 step against two half steps, over a range of dt.

A fifth-order local error gives a ratio near 16 as dt shrinks.

    python scripts/rk4_step_ratio.py --dts 4e-3 2e-3 1e-3 5e-4
"""

import argparse

import numpy as np

from ricciforms.curvature import smooth_test_field
from ricciforms.flow import make_state, rk4_step
from ricciforms.forms import PForm
from ricciforms.grid import GridSpec
from ricciforms.scenarios import random_smooth_perturbation


def one_step_errors(s0, dt, substeps=64):
    ref = s0
    for _ in range(substeps):
        ref = rk4_step(ref, dt / substeps)
    one = rk4_step(s0, dt)
    two = rk4_step(rk4_step(s0, dt / 2), dt / 2)

    def err(s):
        return max(np.max(np.abs(s.ms.g - ref.ms.g)), np.max(np.abs(s.xi.components - ref.xi.components)))

    return err(one), err(two)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dts", type=float, nargs="+", default=[4e-3, 2e-3, 1e-3, 5e-4, 2.5e-4])
    ap.add_argument("--points", type=int, default=8)
    ap.add_argument("--eps", type=float, default=0.3)
    args = ap.parse_args(argv)

    grid = GridSpec.uniform(3, args.points)
    g = random_smooth_perturbation(grid, {"eps": args.eps}, 1)
    s0 = make_state(g, PForm(2, smooth_test_field(grid, (3,), 4), grid))
    for dt in args.dts:
        e1, e2 = one_step_errors(s0, dt)
        print(f"dt={dt:.2e}  one={e1:.3e}  two={e2:.3e}  ratio={e1 / e2:.2f}")


if __name__ == "__main__":
    main()
