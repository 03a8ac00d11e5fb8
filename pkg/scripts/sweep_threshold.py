"""Sweep s across the chaos threshold and tabulate what the spectral tools see.

For each s: the regime, the number of admissible x-intervals, whether a
period-1 orbit verifies, and the worst GSC certificate.

    python3 scripts/sweep_threshold.py --beta 1 --gamma -2 --n 12
"""
import argparse
import csv
import sys

import numpy as np

from bschaos.core import make_params
from bschaos.spectral import (EmptyIntersection, admissible_intervals, find_periodic,
                              gsc_witness_bundle, s_star, verify_periodicity)


def row(params, s, t, seed):
    thr = s_star(params).s_star
    out = {"s": s, "s_star": thr, "regime": "chaotic" if s > thr else "below",
           "intervals": len(admissible_intervals(params, s)), "orbit_dev": np.nan,
           "worst_cert": np.nan}
    if s <= thr:
        return out
    sp = params.with_s(s)
    lo, hi = max(admissible_intervals(params, s), key=lambda iv: iv[1] - iv[0])
    try:
        orb = find_periodic(sp, s, 0.5 * (lo + hi), 1)
        chk = verify_periodicity(sp, orb, np.linspace(9.0, 400.0, 60))
        out["orbit_dev"] = chk.deviation
    except (EmptyIntersection, ValueError):
        pass
    rep = gsc_witness_bundle(params, s, t, seed=seed)
    certs = [w.certificate[-1] for w in rep.omega1 + rep.omega2]
    out["worst_cert"] = max(certs) if certs else np.nan
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--a", type=float, default=0.5)
    ap.add_argument("--nu", type=float, default=1.0)
    ap.add_argument("--beta", type=float, default=1.0)
    ap.add_argument("--gamma", type=float, default=-2.0)
    ap.add_argument("--t", type=float, default=0.5)
    ap.add_argument("--n", type=int, default=12, help="number of s values")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    p = make_params(args.a, args.nu, args.beta, args.gamma, 1.0)
    thr = s_star(p).s_star
    top = max(2.0 * thr, 2.0)
    w = csv.writer(sys.stdout)
    cols = ["s", "s_star", "regime", "intervals", "orbit_dev", "worst_cert"]
    w.writerow(cols)
    for s in np.linspace(0.25 * top, top, args.n):
        r = row(p, float(s), args.t, args.seed)
        w.writerow([f"{r[c]:.6g}" if isinstance(r[c], float) else r[c] for c in cols])


if __name__ == "__main__":
    main()
