"""Acceptance criteria 1-10; each test prints one PASS/FAIL line."""

import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from hybridsim.cli import main
from hybridsim.cost import CoreCost, CostParams, edp
from hybridsim.cyclesim import EnergyWeights, HardwareConfig, calibrate_cost_params, power_breakdown, utilization
from hybridsim.exact import QuantConfig
from hybridsim.experiments import (ExperimentConfig, calibrate_layers, prepare_model, schedule_layers,
                                   simulate_model, sweep)
from hybridsim.powerfit import REFERENCE, SYSTEM_TARGET
from hybridsim.scheduler import brute_force_min_edp, lambda_scale, schedule_cost, tune_lambda
from hybridsim.verify import equivalence_suite, mask_invariance_suite, oracle_proximity_suite

DIAG_MATCHES = np.array([12, 16, 44, 52, 57, 71, 114, 125, 140, 216], dtype=float)


def report(n, ok, text):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} {text}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok


class SuiteRun:
    """Every strategy simulated once per bundled model of a suite."""

    def __init__(self, suite):
        self.cfg = ExperimentConfig(suite=suite)
        self.models = {}
        for mi, (model, descs) in enumerate(self.cfg.model_descriptors().items()):
            layers = calibrate_layers(prepare_model(descs, self.cfg, mi), self.cfg)
            cost = schedule_layers(layers, "cost")
            run = {"layers": layers, "cost_schedules": cost, "cost": simulate_model(layers, cost, self.cfg)}
            for s in ("ann-only", "snn-only"):
                run[s] = simulate_model(layers, schedule_layers(layers, s), self.cfg)
            run["random"] = [simulate_model(layers, schedule_layers(layers, "random", seed), self.cfg)
                             for seed in range(self.cfg.random_seeds)]
            run["layerwise"] = [simulate_model(layers, schedule_layers(layers, f"layerwise-{k}"), self.cfg)
                                for k in range(len(layers) + 1)]
            self.models[model] = run


@pytest.fixture(scope="module")
def suites():
    return {name: SuiteRun(name) for name in ("heterogeneous", "balanced")}


def test_criterion_1_equivalence():
    t = time.perf_counter()
    res = equivalence_suite(n_columns=10_000, seed=1, exhaustive_k=4)
    dt = time.perf_counter() - t
    ok = res.passed and res.failures == 0 and dt < 60
    assert report(1, ok, f"{res.checked} columns (10000 random + exhaustive L=2, K<=4), "
                         f"{res.failures} mismatches, {dt:.1f}s")


def test_criterion_2_mask_invariance():
    res = mask_invariance_suite(instances=10, masks=25, seed=2, shape=(16, 64, 16))
    assert report(2, res.passed, f"{res.checked} mask/instance pairs, {res.failures} differ")


def test_criterion_3_cost_space_diagnostic():
    t = time.perf_counter()
    params = calibrate_cost_params(HardwareConfig(), EnergyWeights.default(), QuantConfig()).params
    _, best = brute_force_min_edp(DIAG_MATCHES, params)
    tuned, _, _ = tune_lambda(DIAG_MATCHES, params)
    got = edp(schedule_cost(DIAG_MATCHES, tuned).assignment(), DIAG_MATCHES, params)
    dt = time.perf_counter() - t
    ok = got <= 1.01 * best and dt < 10
    assert report(3, ok, f"EDP ratio to exhaustive minimum {got / best:.6f} (<= 1.01), {dt:.2f}s")


def test_criterion_4_oracle_proximity():
    res = oracle_proximity_suite(instances=100, seed=4, tol=1.05, required=95)
    d = res.detail
    assert report(4, res.passed, f"{d['within']}/100 instances within 1.05x of the oracle "
                                 f"(need 95), max gap {d['max_edp_gap']:.4f}")


def test_criterion_5_cost_vs_random(suites):
    gains = {}
    for model, run in suites["heterogeneous"].models.items():
        mean_cycles = np.mean([r.total_cycles for r in run["random"]])
        gains[model] = mean_cycles / run["cost"].total_cycles - 1
    ok = all(g >= 0.10 for g in gains.values())
    assert report(5, ok, "throughput gain over mean of 20 random schedules "
                  + ", ".join(f"{m} {100 * g:.1f}%" for m, g in gains.items()) + " (need >= 10%)")


def test_criterion_6_edp_envelope(suites):
    rows = {}
    for model, run in suites["heterogeneous"].models.items():
        c, a, s = run["cost"].edp, run["ann-only"].edp, run["snn-only"].edp
        rows[model] = (c / a, c / s)
    envelope = all(ra <= 1 and rs <= 1 for ra, rs in rows.values())
    deep = any(ra <= 0.7 for ra, _ in rows.values())
    assert report(6, envelope and deep, "EDP cost/ANN-only, cost/SNN-only "
                  + ", ".join(f"{m} {ra:.3f}/{rs:.3f}" for m, (ra, rs) in rows.items()))


def test_criterion_7_utilization(suites):
    balanced = {m: utilization(run["cost"]) for m, run in suites["balanced"].models.items()}
    ok = all(u >= 0.95 for u in balanced.values())
    gaps, beats_random = [], True
    for suite in suites.values():
        for run in suite.models.values():
            u = utilization(run["cost"])
            gaps.append(u - max(utilization(r) for r in run["layerwise"]))
            beats_random &= all(u > utilization(r) for r in run["random"])
    ok = ok and min(gaps) >= 0.10 and beats_random
    assert report(7, ok, "balanced utilization " + ", ".join(f"{m} {u:.3f}" for m, u in balanced.items())
                  + f"; min gap over layerwise-k {min(gaps):.3f}; beats every random schedule {beats_random}")


def test_criterion_8_sweep_trends():
    cfg = ExperimentConfig(suite="heterogeneous")
    sp = [r["speedup"] for r in sweep(cfg, "sparsity")]
    qp = [r["speedup"] for r in sweep(cfg, "quant_pair")]
    cs = sweep(cfg, "core_split")
    sparsity_ok = all(a > b for a, b in zip(sp, sp[1:]))
    quant_ok = all(a > b for a, b in zip(qp, qp[1:]))
    # rows go 6/10, 8/8, 10/6 (SNN/ANN); each step moves two PEs from ANN to SNN
    split_ok = all(b["energy_efficiency"] > a["energy_efficiency"] and b["speedup"] < a["speedup"]
                   for a, b in zip(cs, cs[1:]))
    fmt = lambda xs: "/".join(f"{x:.3f}" for x in xs)
    assert report(8, sparsity_ok and quant_ok and split_ok,
                  f"sparsity speedup {fmt(sp)}, (L,T) speedup {fmt(qp)}, core split speedup "
                  f"{fmt(r['speedup'] for r in cs)} energy eff {fmt(r['energy_efficiency'] for r in cs)}")


def test_criterion_9_power_breakdown(suites):
    run = suites[REFERENCE["suite"]].models[REFERENCE["model"]]
    shares = power_breakdown(run["cost"])["system"]
    within = all(abs(shares[k] - SYSTEM_TARGET[k]) <= 5 for k in SYSTEM_TARGET)
    total = sum(shares.values())
    ok = within and abs(total - 100.0) < 1e-9
    assert report(9, ok, ", ".join(f"{k} {v:.2f}% (target {SYSTEM_TARGET[k]})" for k, v in shares.items())
                  + f", sum {total:.12f}")


def _timed_schedule(n, params, repeats=3):
    r = np.random.default_rng(1).gamma(2.0, 50.0, n)
    params = params.with_lambda(lambda_scale(r, params))
    best = np.inf
    for _ in range(repeats):
        t = time.perf_counter()
        schedule_cost(r, params)
        best = min(best, time.perf_counter() - t)
    return best


def test_criterion_10_determinism_and_monotonicity(suites, tmp_path):
    codes = [main(["run", "--out", str(tmp_path / d)]) for d in ("a", "b")]
    fa = {p.relative_to(tmp_path / "a"): p.read_bytes() for p in sorted((tmp_path / "a").rglob("*")) if p.is_file()}
    fb = {p.relative_to(tmp_path / "b"): p.read_bytes() for p in sorted((tmp_path / "b").rglob("*")) if p.is_file()}
    identical = codes == [0, 0] and fa == fb and len(fa) > 0

    traces = [s.refine.phi for suite in suites.values() for run in suite.models.values()
              for s in run["cost_schedules"]]
    monotone = all(b <= a * (1 + 1e-12) for phi in traces for a, b in zip(phi, phi[1:]))

    params = CostParams(CoreCost(1, 1, 1.2, 32, 10, 16), CoreCost(4, 2, 1, 10, 10, 16))
    t4, t5 = _timed_schedule(10 ** 4, params), _timed_schedule(10 ** 5, params, repeats=1)
    ratio = t5 / t4
    ok = identical and monotone and ratio < 15
    assert report(10, ok, f"byte-identical reruns {identical} ({len(fa)} files); {len(traces)} Stage-2 traces "
                          f"non-increasing {monotone}; timing ratio t(1e5)/t(1e4) {ratio:.2f} (< 15)")
