#!/usr/bin/env python3
"""Trace the Bishop volume ratio as a function of geodesic-sphere radius.

For a chart with Ric >= (n-1) Kref the ratio area(S_r) / area_model(r) is
nonincreasing in r and bounded by one. The script samples the ratio on a
radius grid and writes one CSV row per radius.
"""

import argparse
import csv
import sys

import numpy as np

from riemannkit import comparison, manifold


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--builtin", default="sphere_stereo")
    ap.add_argument("--param", default="n=2,R=1",
                    help="comma-separated key=value pairs")
    ap.add_argument("--point", default="0.3,0.1")
    ap.add_argument("--Kref", type=float, default=0.0)
    ap.add_argument("--rmax", type=float, default=1.5)
    ap.add_argument("--samples", type=int, default=15)
    ap.add_argument("--directions", type=int, default=256)
    ap.add_argument("--output", default="-", help="CSV path (default stdout)")
    args = ap.parse_args(argv)

    params = {}
    for item in args.param.split(","):
        key, val = item.split("=")
        params[key.strip()] = float(val)
    if "n" in params:
        params["n"] = int(params["n"])
    chart = manifold.builtin(args.builtin, params)
    p = np.array([float(s) for s in args.point.split(",")])

    out = sys.stdout if args.output == "-" else open(args.output, "w", newline="")
    with out:
        w = csv.writer(out)
        w.writerow(["r", "area", "model_area", "ratio", "pointwise"])
        for r in np.linspace(args.rmax / args.samples, args.rmax, args.samples):
            rep = comparison.volume_compare(chart, p, float(r), Kref=args.Kref,
                                            directions=args.directions)
            w.writerow([f"{r:.6g}", f"{rep['area']:.12g}",
                        f"{rep['reference']:.12g}", f"{rep['ratio']:.12g}",
                        int(rep["pointwise"])])
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
