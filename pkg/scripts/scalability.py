"""Sparsity, (L, T) and core-split sweeps on one model; one CSV per axis.

Set HYBRIDSIM_WORKERS to run sweep points in parallel.
"""

import argparse
import csv
from pathlib import Path

from hybridsim.experiments import SWEEP_AXES, ExperimentConfig, sweep

KEYS = ["axis", "point", "model", "cycles", "energy", "edp", "utilization", "speedup", "energy_efficiency"]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", type=Path)
    ap.add_argument("--model", default=None)
    ap.add_argument("--axis", choices=sorted(SWEEP_AXES), action="append")
    ap.add_argument("--out", type=Path, default=Path("sweeps"))
    args = ap.parse_args()
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    args.out.mkdir(parents=True, exist_ok=True)
    for axis in args.axis or list(SWEEP_AXES):
        rows = sweep(cfg, axis, args.model)
        path = args.out / f"sweep-{axis}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, KEYS, lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in r.items()})
        for r in rows:
            print(f"{axis:10s} {r['point']:>6s} speedup {r['speedup']:.3f} "
                  f"energy eff {r['energy_efficiency']:.3f} utilization {r['utilization']:.3f}")
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
