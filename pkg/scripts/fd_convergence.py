"""Grid refinement table: Crank-Nicolson against the Romanov quadrature.

Halves dz (and dt = dz/8 with it) and prints the discrepancy and its
reduction factor, which should approach 4.  Needs z_max / 256 to divide 1/4.

    python3 scripts/fd_convergence.py --beta 0.5 --gamma -0.2 --field bump
"""
import argparse

import numpy as np

from bschaos.core import field_library, from_z, make_params
from bschaos.fdcheck import cross_compare, make_zgrid


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--a", type=float, default=0.5)
    ap.add_argument("--nu", type=float, default=1.0)
    ap.add_argument("--beta", type=float, default=0.0)
    ap.add_argument("--gamma", type=float, default=1.0)
    ap.add_argument("--s", type=float, default=4.0)
    ap.add_argument("--t", type=float, default=0.5)
    ap.add_argument("--field", default="bump", choices=("bump", "gaussian_in_z"))
    ap.add_argument("--z-max", type=float, default=16.0)
    ap.add_argument("--levels", type=int, default=5)
    args = ap.parse_args(argv)

    p = make_params(args.a, args.nu, args.beta, args.gamma, args.s)
    if args.field == "bump":
        f = field_library("bump", center=2.0, width=1.0)
    else:
        f = field_library("gaussian_in_z", p, center=4.0, width=1.0)
    # probes on nodes shared by every level, so interpolation adds nothing
    zp = np.arange(np.ceil(0.15 * args.z_max), 0.75 * args.z_max, 0.25)
    probes = from_z(p, zp)

    print(f"{'n_z':>6} {'dz':>10} {'n_t':>6} {'discrepancy':>12} {'factor':>7}")
    prev = None
    for k in range(args.levels):
        n_z = 256 * 2 ** k
        grid = make_zgrid(args.z_max, n_z, args.t)
        d = cross_compare(p, f, args.t, grid, probes)
        factor = "" if prev is None else f"{prev / d:7.3f}"
        print(f"{n_z:6d} {grid.dz:10.3e} {grid.n_t:6d} {d:12.4e} {factor}")
        prev = d


if __name__ == "__main__":
    main()
