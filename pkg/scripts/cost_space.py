"""Cost-space diagnostic: every assignment of a 10-column layer, with the cost schedule marked.

Writes one CSV row per assignment (energy, delay, EDP, Phi at the tuned
lambda) and prints where the exhaustive EDP minimum and the two-stage
schedule land.
"""

import argparse
import csv
import sys

import numpy as np

from hybridsim.cyclesim import EnergyWeights, HardwareConfig, calibrate_cost_params
from hybridsim.exact import QuantConfig
from hybridsim.scheduler import enumerate_assignments, schedule_cost, tune_lambda

MATCHES = [12, 16, 44, 52, 57, 71, 114, 125, 140, 216]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--matches", type=int, nargs="+", default=MATCHES)
    ap.add_argument("--out", default="-", help="CSV path, '-' for stdout")
    args = ap.parse_args()

    r = np.asarray(args.matches, dtype=float)
    params = calibrate_cost_params(HardwareConfig(), EnergyWeights.default(), QuantConfig()).params
    tuned, mult, _ = tune_lambda(r, params)
    sched = schedule_cost(r, tuned)
    masks, energy, delay = enumerate_assignments(r, params)
    edp = energy * delay
    phi = energy + tuned.lam * delay
    best = int(np.argmin(edp))
    chosen = int(np.flatnonzero((masks == sched.mask).all(axis=1))[0])

    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["mask", "snn_columns", "energy", "delay", "edp", "phi", "edp_optimal", "cost_schedule"])
    for x in range(len(masks)):
        w.writerow(["".join("1" if b else "0" for b in masks[x]), int(masks[x].sum()), repr(float(energy[x])),
                    repr(float(delay[x])), repr(float(edp[x])), repr(float(phi[x])), int(x == best),
                    int(x == chosen)])
    if fh is not sys.stdout:
        fh.close()
    print(f"lambda = {tuned.lam:.4g} ({mult} x scale); EDP optimum {edp[best]:.6g} at "
          f"{''.join('1' if b else '0' for b in masks[best])}; cost schedule {edp[chosen]:.6g} "
          f"(ratio {edp[chosen] / edp[best]:.4f})", file=sys.stderr)


if __name__ == "__main__":
    main()
