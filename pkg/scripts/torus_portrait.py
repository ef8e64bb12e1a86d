#!/usr/bin/env python3
"""Classify torus geodesics over a grid of launch angles.

Starting from the outer equator of the (R, r) torus, sweep the launch angle
phi0 away from the meridian and report the qualitative class of each geodesic
together with its Clairaut constant and, when defined, the per-oscillation
theta advance.
"""

import argparse
import json
import math
import sys

from riemannkit import surfrev


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--torus", default="2,1", help="R,r")
    ap.add_argument("--angles", type=int, default=25,
                    help="number of phi0 samples in (0, pi/2)")
    ap.add_argument("--confirm", action="store_true",
                    help="confirm oscillation by integrating the geodesic")
    ap.add_argument("--output", default="-", help="JSON path (default stdout)")
    args = ap.parse_args(argv)

    R, r = (float(s) for s in args.torus.split(","))
    prof = surfrev._profile_of(surfrev.torus_chart(R, r))

    entries = []
    for k in range(1, args.angles + 1):
        phi0 = k * (math.pi / 2) / (args.angles + 1)
        rep = surfrev.classify_geodesic(prof, (0.0, 0.0, phi0),
                                        confirm=args.confirm)
        entry = {"phi0": phi0, "c": rep["c"], "class": rep["class"]}
        if rep["class"] == "oscillating":
            dt = rep.get("delta_theta")
            entry["delta_theta"] = dt
            if dt is not None:
                entry["rational"] = surfrev.rationality_flag(
                    dt / (2 * math.pi))["within_window"]
        entries.append(entry)

    report = {"torus": {"R": R, "r": r}, "geodesics": entries}
    text = json.dumps(report, indent=2)
    if args.output == "-":
        print(text)
    else:
        with open(args.output, "w") as fh:
            fh.write(text + "\n")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
