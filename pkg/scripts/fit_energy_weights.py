"""Fit the default energy weights to the target power shares.

Runs the reference workload under the cost schedule, solves the weights for
the observed event counts, recalibrates and repeats until the schedule stops
moving. Writes the package default unless --out is given.
"""

import argparse
from pathlib import Path

from hybridsim.cyclesim import EnergyWeights, power_breakdown
from hybridsim.experiments import ExperimentConfig, calibrate_layers, prepare_model, run_strategy
from hybridsim.powerfit import REFERENCE, dump_weights, fit_report, solve_weights

DEFAULT_OUT = Path(__file__).resolve().parents[1] / "src/hybridsim/defaults/energy_weights.json"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=DEFAULT_OUT)
    ap.add_argument("--rounds", type=int, default=8)
    args = ap.parse_args()

    weights = EnergyWeights()
    for i in range(args.rounds):
        cfg = ExperimentConfig(suite=REFERENCE["suite"], weights=weights, seed=REFERENCE["seed"])
        layers = calibrate_layers(prepare_model(cfg.model_descriptors()[REFERENCE["model"]], cfg), cfg)
        report = run_strategy(layers, REFERENCE["strategy"], cfg)
        new = solve_weights(report.events)
        shares = power_breakdown(report)["system"]
        print(f"round {i}: shares under previous weights "
              + ", ".join(f"{k} {v:.2f}%" for k, v in shares.items()))
        if new == weights:
            break
        weights = new
    # final check with the fitted weights
    cfg = ExperimentConfig(suite=REFERENCE["suite"], weights=weights, seed=REFERENCE["seed"])
    layers = calibrate_layers(prepare_model(cfg.model_descriptors()[REFERENCE["model"]], cfg), cfg)
    report = run_strategy(layers, REFERENCE["strategy"], cfg)
    doc = fit_report(report, weights)
    for group, shares in doc["achieved"].items():
        print(group, {k: round(v, 2) for k, v in shares.items()})
    args.out.write_text(dump_weights(doc))
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
