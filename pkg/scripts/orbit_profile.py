"""Profile of a period-1 orbit: relative deviation of T(t0) phi from phi against z.

The deviation is large near z = 0, where the half-line semigroup differs
from the exponential action, and drops to quadrature level past the
exclusion zone.  Also prints the a-priori bound for comparison.

    python3 scripts/orbit_profile.py --s 4 --x-seed 0.5
"""
import argparse

import numpy as np

from bschaos.core import eigen, from_z, make_params
from bschaos.romanov import apply_B, reflection_error_bound
from bschaos.spectral import exclusion_zone, find_periodic


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--a", type=float, default=0.5)
    ap.add_argument("--nu", type=float, default=1.0)
    ap.add_argument("--beta", type=float, default=0.0)
    ap.add_argument("--gamma", type=float, default=1.0)
    ap.add_argument("--s", type=float, default=4.0)
    ap.add_argument("--x-seed", type=float, default=0.5)
    ap.add_argument("--rotation", default="1")
    args = ap.parse_args(argv)

    p = make_params(args.a, args.nu, args.beta, args.gamma, args.s)
    orb = find_periodic(p, args.s, args.x_seed, args.rotation)
    lam, T = orb.point.lam, orb.t0 * orb.m
    phi = eigen(p, lam)
    g = phi
    for _ in range(orb.m):
        g = apply_B(p, g, orb.t0).field

    z = np.arange(1.0, 25.0, 1.0)
    x = from_z(p, z)
    dev = np.abs(g(x) - phi(x)) / np.abs(phi(x))
    bound = reflection_error_bound(p, lam, T, x)
    print(f"lambda = {lam:.6g}, t0 = {orb.t0:.6g}, m = {orb.m}")
    print(f"exclusion zone for tol 1e-5: z >= {exclusion_zone(p, lam, T, 1e-5):.3f}")
    print(f"{'z':>5} {'deviation':>11} {'bound':>11}")
    for zi, d, b in zip(z, dev, bound):
        print(f"{zi:5.1f} {d:11.3e} {b:11.3e}")


if __name__ == "__main__":
    main()
