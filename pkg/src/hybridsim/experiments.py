"""End-to-end pipeline pieces shared by the CLI, scripts and tests."""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .cost import ColumnStats, CostParams, stable_digest
from .cyclesim import (EnergyWeights, HardwareConfig, LayerJob, SimReport, calibrate_cost_params,
                       energy_efficiency, simulate_network, speedup, utilization)
from .errors import ParameterError
from .exact import QuantConfig
from .scheduler import (brute_force_min_edp, schedule_cost, schedule_layerwise,
                        schedule_random, schedule_single, tune_lambda, _schedule_from)
from .workload import LayerDescriptor, Workload, gen_workload, profile, reference_suite

STRATEGIES = ("cost", "random", "ann-only", "snn-only", "oracle")
SWEEP_AXES = {
    "sparsity": (0.9, 0.6, 0.25),
    "quant_pair": ((2, 5), (4, 11), (8, 23)),
    "core_split": ((6, 10), (8, 8), (10, 6)),
}
SWEEP_BASELINE = {"sparsity": 0, "quant_pair": 0, "core_split": 1}


@dataclass
class ExperimentConfig:
    suite: str = "heterogeneous"
    models: tuple = ()                      # subset of suite models; empty = all
    descriptors: dict | None = None         # explicit model -> descriptors, overrides suite
    quant: QuantConfig = field(default_factory=QuantConfig)
    hardware: HardwareConfig = field(default_factory=HardwareConfig)
    weights: EnergyWeights | None = None    # None -> shipped defaults
    cost_params: CostParams | str = "calibrate"
    strategies: tuple = ("cost",)
    seed: int = 0
    random_seeds: int = 20
    q: float = 0.9
    n_samples: int = 8
    sweep_model: str = "vgg"
    out: str = "out"

    def __post_init__(self):
        if not self.strategies:
            raise ParameterError("strategy list is empty")
        for s in self.strategies:
            if s not in STRATEGIES and not s.startswith("layerwise-"):
                raise ParameterError(f"unknown strategy {s!r}")

    def energy_weights(self) -> EnergyWeights:
        return self.weights if self.weights is not None else EnergyWeights.default()

    def model_descriptors(self) -> dict:
        models = self.descriptors if self.descriptors is not None else reference_suite(self.suite)
        if self.models:
            missing = set(self.models) - set(models)
            if missing:
                raise ParameterError(f"unknown models {sorted(missing)}")
            models = {k: models[k] for k in self.models}
        return models

    def to_dict(self) -> dict:
        return {
            "suite": self.suite, "models": list(self.models),
            "descriptors": None if self.descriptors is None else
            {k: [d.to_dict() for d in v] for k, v in self.descriptors.items()},
            "quant": self.quant.to_dict(), "hardware": self.hardware.to_dict(),
            "weights": None if self.weights is None else self.weights.to_dict(),
            "cost_params": self.cost_params if isinstance(self.cost_params, str) else self.cost_params.to_dict(),
            "strategies": list(self.strategies), "seed": self.seed, "random_seeds": self.random_seeds,
            "q": self.q, "n_samples": self.n_samples, "sweep_model": self.sweep_model, "out": self.out,
        }

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        d = dict(d)
        known = {"suite", "models", "descriptors", "quant", "hardware", "weights", "cost_params",
                 "strategies", "seed", "random_seeds", "q", "n_samples", "sweep_model", "out"}
        unknown = set(d) - known
        if unknown:
            raise ParameterError(f"unknown config keys {sorted(unknown)}")
        if d.get("descriptors") is not None:
            d["descriptors"] = {k: [LayerDescriptor.from_dict(x) for x in v] for k, v in d["descriptors"].items()}
        if "quant" in d:
            d["quant"] = QuantConfig(**d["quant"])
        if "hardware" in d:
            d["hardware"] = HardwareConfig.from_dict(d["hardware"])
        if d.get("weights") is not None:
            d["weights"] = EnergyWeights.from_dict(d["weights"])
        cp = d.get("cost_params")
        if isinstance(cp, dict):
            d["cost_params"] = CostParams.from_dict(cp)
        elif cp is not None and cp != "calibrate":
            raise ParameterError("cost_params must be an object or \"calibrate\"")
        for k in ("models", "strategies"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)

    def digest(self) -> str:
        """Hash of everything that affects results (the output directory does not)."""
        d = self.to_dict()
        d.pop("out")
        if self.weights is None:
            d["weights"] = self.energy_weights().to_dict()
        return stable_digest(d)

    @classmethod
    def load(cls, path) -> ExperimentConfig:
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class LayerData:
    desc: LayerDescriptor
    workload: Workload
    stats: ColumnStats
    params: CostParams | None = None


def layer_seed(seed: int, *keys) -> int:
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1)[0])


def prepare_model(descs, cfg: ExperimentConfig, model_index: int = 0) -> list:
    layers = []
    for i, d in enumerate(descs):
        wl = gen_workload(d, layer_seed(cfg.seed, model_index, i), cfg.quant.L, cfg.n_samples)
        layers.append(LayerData(d, wl, profile(wl.samples, wl.weights, cfg.q)))
    return layers


def calibrate_layers(layers, cfg: ExperimentConfig, hw: HardwareConfig | None = None):
    """Per-layer cost coefficients from microbenchmarks at the layer's shape and densities."""
    hw = hw or cfg.hardware
    weights = cfg.energy_weights()
    for ld in layers:
        if isinstance(cfg.cost_params, CostParams):
            ld.params = cfg.cost_params.with_pes(hw.snn_pes, hw.ann_pes)
            continue
        M, K, _ = ld.desc.dims
        ld.params = calibrate_cost_params(hw, weights, cfg.quant, shape=(M, K),
                                          a_density=ld.desc.act_density,
                                          w_density=ld.desc.weight_density).params
    return layers


def schedule_layers(layers, strategy: str, seed: int = 0) -> list:
    if strategy == "cost":
        out = []
        for ld in layers:
            tuned, _, _ = tune_lambda(ld.stats, ld.params)
            out.append(schedule_cost(ld.stats, tuned))
        return out
    if strategy == "random":
        return [schedule_random(ld.stats, layer_seed(seed, i), ld.params) for i, ld in enumerate(layers)]
    if strategy in ("ann-only", "snn-only"):
        return [schedule_single(ld.stats, ld.params, strategy[:3]) for ld in layers]
    if strategy.startswith("layerwise-"):
        k = int(strategy.split("-", 1)[1])
        return schedule_layerwise([ld.stats for ld in layers], [ld.params for ld in layers], k)
    if strategy == "oracle":
        out = []
        for ld in layers:
            assign, _ = brute_force_min_edp(ld.stats, ld.params)
            out.append(_schedule_from(assign, "oracle", ld.stats, ld.params))
        return out
    raise ParameterError(f"unknown strategy {strategy!r}")


def simulate_model(layers, schedules, cfg: ExperimentConfig, hw: HardwareConfig | None = None,
                   memory: bool = True, compute_values: bool = False) -> SimReport:
    hw = hw or cfg.hardware
    jobs = [LayerJob(ld.workload.test_input, ld.workload.weights, cfg.quant, s, ld.desc.name)
            for ld, s in zip(layers, schedules)]
    return simulate_network(jobs, hw, cfg.energy_weights(), memory=memory, compute_values=compute_values)


def run_strategy(layers, strategy, cfg: ExperimentConfig, seed: int = 0, hw=None) -> SimReport:
    return simulate_model(layers, schedule_layers(layers, strategy, seed), cfg, hw)


def summary_row(report: SimReport, base: SimReport | None = None) -> dict:
    row = {"cycles": int(report.total_cycles), "energy": report.total_energy, "edp": report.edp,
           "utilization": utilization(report)}
    if base is not None:
        row["speedup"] = speedup(report, base)
        row["energy_efficiency"] = energy_efficiency(report, base)
    return row


# ---------------------------------------------------------------------------
# sweeps


def _sweep_point(args):
    axis, value, cfg_dict, descs = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    hw = cfg.hardware
    quant = cfg.quant
    if axis == "sparsity":
        descs = [d.with_density(act_density=round(1.0 - value, 6)) for d in descs]
    elif axis == "quant_pair":
        L, _ = value
        quant = QuantConfig(L, cfg.quant.theta)
    elif axis == "core_split":
        hw = hw.with_pes(*value)
    else:
        raise ParameterError(f"unknown sweep axis {axis!r}")
    cfg = replace(cfg, quant=quant, hardware=hw)
    layers = calibrate_layers(prepare_model(descs, cfg), cfg)
    rep = run_strategy(layers, "cost", cfg)
    return rep.total_cycles, rep.total_energy, rep.edp, utilization(rep)


def sweep(cfg: ExperimentConfig, axis: str, model: str | None = None, workers: int | None = None) -> list:
    """One row per sweep point, with speed and energy relative to the axis baseline point."""
    if axis not in SWEEP_AXES:
        raise ParameterError(f"unknown sweep axis {axis!r}; choose from {sorted(SWEEP_AXES)}")
    model = model or cfg.sweep_model
    descs = cfg.model_descriptors()[model]
    if workers is None:
        workers = int(os.environ.get("HYBRIDSIM_WORKERS", "1"))
    cfg_dict = cfg.to_dict()
    if cfg.weights is None:
        cfg_dict["weights"] = cfg.energy_weights().to_dict()
    tasks = [(axis, v, cfg_dict, descs) for v in SWEEP_AXES[axis]]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_sweep_point, tasks))
    else:
        results = [_sweep_point(t) for t in tasks]
    b = results[SWEEP_BASELINE[axis]]
    rows = []
    for v, (cycles, energy, edp_, util) in zip(SWEEP_AXES[axis], results):
        label = f"{v[0]}/{v[1]}" if isinstance(v, tuple) else f"{round(100 * v)}%"
        rows.append({"axis": axis, "point": label, "model": model, "cycles": int(cycles),
                     "energy": energy, "edp": edp_, "utilization": util,
                     "speedup": b[0] / cycles, "energy_efficiency": b[1] / energy})
    return rows
