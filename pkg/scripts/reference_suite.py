"""Every strategy on every bundled model; one CSV row per (suite, model, strategy).

Speedup and energy efficiency are relative to the SNN-only run of the same
model. Random schedules are averaged over the config's random seeds.
"""

import argparse
import csv
import sys

import numpy as np

from hybridsim.cyclesim import utilization
from hybridsim.experiments import ExperimentConfig, calibrate_layers, prepare_model, run_strategy
from hybridsim.workload import SUITES

STRATEGIES = ("cost", "random", "ann-only", "snn-only")


def rows_for(suite, seeds):
    cfg = ExperimentConfig(suite=suite, random_seeds=seeds)
    for mi, (model, descs) in enumerate(cfg.model_descriptors().items()):
        layers = calibrate_layers(prepare_model(descs, cfg, mi), cfg)
        base = run_strategy(layers, "snn-only", cfg)
        strategies = list(STRATEGIES) + [f"layerwise-{k}" for k in range(1, len(layers))]
        for s in strategies:
            reps = ([run_strategy(layers, s, cfg, seed=i) for i in range(cfg.random_seeds)] if s == "random"
                    else [run_strategy(layers, s, cfg)])
            cycles = np.mean([r.total_cycles for r in reps])
            energy = np.mean([r.total_energy for r in reps])
            yield {"suite": suite, "model": model, "strategy": s, "cycles": float(cycles),
                   "energy": float(energy), "edp": float(np.mean([r.edp for r in reps])),
                   "utilization": float(np.mean([utilization(r) for r in reps])),
                   "speedup": float(base.total_cycles / cycles),
                   "energy_efficiency": float(base.total_energy / energy)}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--suite", choices=sorted(SUITES), action="append")
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--out", default="-")
    args = ap.parse_args()
    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    keys = ["suite", "model", "strategy", "cycles", "energy", "edp", "utilization", "speedup", "energy_efficiency"]
    w = csv.DictWriter(fh, keys, lineterminator="\n")
    w.writeheader()
    for suite in args.suite or sorted(SUITES):
        for row in rows_for(suite, args.seeds):
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
            fh.flush()
    if fh is not sys.stdout:
        fh.close()


if __name__ == "__main__":
    main()
