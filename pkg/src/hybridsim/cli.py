"""Staged command-line pipeline: gen -> profile -> calibrate -> schedule -> simulate, plus sweep and verify.

Every stage reads the previous stage's artifacts from the output directory,
writes JSON with sorted keys and no timestamps, and records the hashes of
its inputs so stale artifacts can be detected.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from .cost import ColumnStats, CostParams
from .errors import CapacityError, ParameterError, PipelineError
from .experiments import (STRATEGIES, SWEEP_AXES, ExperimentConfig, LayerData, calibrate_layers, layer_seed,
                          schedule_layers, simulate_model, sweep)
from .scheduler import schedules_from_dict, schedules_to_dict
from .sparse import COL_MAJOR, BitmapMatrix, read_matrices, write_matrices
from .verify import run_all
from .workload import LayerDescriptor, Workload, gen_workload, profile

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY, EXIT_CAPACITY = 0, 2, 3, 4
MANIFEST = "workload.json"
STATS = "stats.json"
PARAMS = "cost_params.json"


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _file_hash(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()[:16]


def _require(out: Path, name: str, stage: str) -> Path:
    path = out / name
    if not path.exists():
        raise PipelineError(stage, path)
    return path


def _load_json(path: Path):
    with open(path) as fh:
        return json.load(fh)


def _check_upstream(doc: dict, key: str, path: Path):
    if doc.get("provenance", {}).get(key) != _file_hash(path):
        warnings.warn(f"{path.name} changed since this artifact was written (stale input)", stacklevel=2)


# ---------------------------------------------------------------------------
# stages


def cmd_gen(cfg: ExperimentConfig, out: Path) -> Path:
    entries = []
    for mi, (model, descs) in enumerate(cfg.model_descriptors().items()):
        for li, d in enumerate(descs):
            seed = layer_seed(cfg.seed, mi, li)
            wl = gen_workload(d, seed, cfg.quant.L, cfg.n_samples)
            rel = Path("operands") / model / f"{li:02d}.nfbm"
            mats = [BitmapMatrix.from_dense(wl.weights, COL_MAJOR), BitmapMatrix.from_dense(wl.test_input)]
            mats += [BitmapMatrix.from_dense(s) for s in wl.samples]
            (out / rel).parent.mkdir(parents=True, exist_ok=True)
            write_matrices(out / rel, mats)
            entries.append({"model": model, "index": li, "name": d.name, "descriptor": d.to_dict(),
                            "seed": seed, "file": str(rel), "file_hash": _file_hash(out / rel)})
    path = out / MANIFEST
    config = cfg.to_dict()
    config.pop("out")           # artifacts must not depend on where they are written
    _write(path, _dump({"config": config, "provenance": {"config_hash": cfg.digest()},
                        "layers": entries}))
    return path


def _workloads(out: Path, operands: bool = True):
    """(model, Workload) per layer from the gen stage; without operands only the descriptors are filled."""
    path = _require(out, MANIFEST, "gen")
    manifest = _load_json(path)
    layers = []
    for e in manifest["layers"]:
        desc = LayerDescriptor.from_dict(e["descriptor"])
        if not operands:
            layers.append((e["model"], Workload(desc, e["seed"], None, None, None)))
            continue
        f = _require(out, e["file"], "gen")
        if _file_hash(f) != e["file_hash"]:
            warnings.warn(f"{e['file']} does not match the manifest hash", stacklevel=2)
        dense = [m.to_dense() for m in read_matrices(f)]
        M, K, _ = desc.dims
        samples = np.stack(dense[2:]) if len(dense) > 2 else np.zeros((0, M, K), np.int8)
        layers.append((e["model"], Workload(desc, e["seed"], samples, dense[0], dense[1])))
    return layers, path


def cmd_profile(cfg: ExperimentConfig, out: Path) -> Path:
    layers, src = _workloads(out)
    entries = [{"model": model, "name": wl.desc.name, "stats": profile(wl.samples, wl.weights, cfg.q).to_dict()}
               for model, wl in layers]
    path = out / STATS
    _write(path, _dump({"provenance": {MANIFEST: _file_hash(src)}, "q": cfg.q, "layers": entries}))
    return path


def cmd_calibrate(cfg: ExperimentConfig, out: Path) -> Path:
    layers, src = _workloads(out)
    data = [LayerData(wl.desc, wl, None) for _, wl in layers]
    calibrate_layers(data, cfg)
    entries = [{"model": model, "name": ld.desc.name, "params": ld.params.to_dict()}
               for (model, _), ld in zip(layers, data)]
    path = out / PARAMS
    _write(path, _dump({"provenance": {MANIFEST: _file_hash(src), "config_hash": cfg.digest()},
                        "source": "fixed" if isinstance(cfg.cost_params, CostParams) else "calibrate",
                        "layers": entries}))
    return path


def _layer_data(out: Path, operands: bool = True):
    layers, manifest = _workloads(out, operands)
    stats_path = _require(out, STATS, "profile")
    params_path = _require(out, PARAMS, "calibrate")
    stats_doc, params_doc = _load_json(stats_path), _load_json(params_path)
    _check_upstream(stats_doc, MANIFEST, manifest)
    _check_upstream(params_doc, MANIFEST, manifest)
    if not len(layers) == len(stats_doc["layers"]) == len(params_doc["layers"]):
        raise PipelineError("profile", stats_path)
    models: dict = {}
    for (model, wl), s, p in zip(layers, stats_doc["layers"], params_doc["layers"]):
        models.setdefault(model, []).append(
            LayerData(wl.desc, wl, ColumnStats.from_dict(s["stats"]), CostParams.from_dict(p["params"])))
    return models, {STATS: _file_hash(stats_path), PARAMS: _file_hash(params_path)}


def _strategy(cfg: ExperimentConfig, strategy: str | None) -> str:
    s = strategy or cfg.strategies[0]
    if s not in STRATEGIES and not s.startswith("layerwise-"):
        raise ParameterError(f"unknown strategy {s!r}")
    return s


def cmd_schedule(cfg: ExperimentConfig, out: Path, strategy: str | None = None) -> Path:
    strategy = _strategy(cfg, strategy)
    models, prov = _layer_data(out, operands=False)
    schedules, names = [], []
    for model, layers in models.items():
        schedules += schedule_layers(layers, strategy, cfg.seed)
        names += [f"{model}/{ld.desc.name}" for ld in layers]
    doc = schedules_to_dict(schedules, names)
    doc["provenance"] = prov
    path = out / f"schedule-{strategy}.json"
    _write(path, _dump(doc))
    return path


def _report_rows(model, report):
    return [(model, k, v) for k, v in report.metric_rows()]


def cmd_simulate(cfg: ExperimentConfig, out: Path, strategy: str | None = None) -> Path:
    strategy = _strategy(cfg, strategy)
    models, _ = _layer_data(out)
    sched_path = _require(out, f"schedule-{strategy}.json", "schedule")
    doc = _load_json(sched_path)
    flat = [ld for layers in models.values() for ld in layers]
    schedules = schedules_from_dict(doc, [ld.stats for ld in flat])
    reports, rows = {}, []
    for model, layers in models.items():
        scheds = [schedules[f"{model}/{ld.desc.name}"] for ld in layers]
        rep = simulate_model(layers, scheds, cfg)
        rep.name = model
        reports[model] = rep.to_dict()
        rows += _report_rows(model, rep)
    path = out / f"report-{strategy}.json"
    _write(path, _dump({"provenance": {sched_path.name: _file_hash(sched_path)}, "strategy": strategy,
                        "models": reports}))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "metric", "value"])
    for model, k, v in rows:
        w.writerow([model, k, repr(float(v))])
    _write(out / f"report-{strategy}.csv", buf.getvalue())
    return path


def cmd_sweep(cfg: ExperimentConfig, out: Path, axis: str) -> Path:
    rows = sweep(cfg, axis)
    buf = io.StringIO()
    keys = ["axis", "point", "model", "cycles", "energy", "edp", "utilization", "speedup", "energy_efficiency"]
    w = csv.DictWriter(buf, keys, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in r.items()})
    path = out / f"sweep-{axis}.csv"
    _write(path, buf.getvalue())
    return path


def cmd_verify(cfg: ExperimentConfig, out: Path, inject_fault: bool = False) -> tuple[Path, bool]:
    results = run_all(cfg.seed, inject_fault)
    for r in results:
        print(r.line())
    ok = all(r.passed for r in results)
    path = out / "verify.json"
    _write(path, _dump({"passed": ok, "inject_fault": inject_fault, "seed": cfg.seed,
                        "suites": [r.to_dict() for r in results]}))
    return path, ok


def cmd_run(cfg: ExperimentConfig, out: Path, strategy: str | None = None) -> list[Path]:
    paths = [cmd_gen(cfg, out), cmd_profile(cfg, out), cmd_calibrate(cfg, out)]
    for s in ([strategy] if strategy else cfg.strategies):
        paths += [cmd_schedule(cfg, out, s), cmd_simulate(cfg, out, s)]
    return paths


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="experiment config JSON")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", type=Path, help="output directory (default: config 'out')")
    ap = argparse.ArgumentParser(prog="hybridsim", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, text in (("gen", "generate operands"), ("profile", "profile match counts"),
                       ("calibrate", "fit cost coefficients")):
        sub.add_parser(name, parents=[common], help=text)
    for name, text in (("schedule", "assign columns to cores"), ("simulate", "run the cycle model"),
                       ("run", "gen through simulate in one go")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--strategy", help="cost | random | ann-only | snn-only | oracle | layerwise-k")
    p = sub.add_parser("sweep", parents=[common], help="scalability sweep to CSV")
    p.add_argument("--axis", required=True, choices=sorted(SWEEP_AXES))
    p = sub.add_parser("verify", parents=[common], help="self-check suites")
    p.add_argument("--inject-fault", action="store_true", help="perturb the soft reset (must fail)")
    return ap


def _config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.out is not None:
        cfg = replace(cfg, out=str(args.out))
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config(args)
        out = Path(cfg.out)
        if args.command == "verify":
            path, ok = cmd_verify(cfg, out, args.inject_fault)
            print(path)
            return EXIT_OK if ok else EXIT_VERIFY
        if args.command == "sweep":
            result = cmd_sweep(cfg, out, args.axis)
        elif args.command in ("schedule", "simulate", "run"):
            fn = {"schedule": cmd_schedule, "simulate": cmd_simulate, "run": cmd_run}[args.command]
            result = fn(cfg, out, args.strategy)
        else:
            result = {"gen": cmd_gen, "profile": cmd_profile, "calibrate": cmd_calibrate}[args.command](cfg, out)
        for p in result if isinstance(result, list) else [result]:
            print(p)
        return EXIT_OK
    except CapacityError as e:
        print(f"capacity error: {e}", file=sys.stderr)
        return EXIT_CAPACITY
    except (PipelineError, ParameterError, json.JSONDecodeError, FileNotFoundError, TypeError, KeyError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
