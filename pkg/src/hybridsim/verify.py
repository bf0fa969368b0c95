"""Self-check suites: exact equivalence, mask invariance, Phi monotonicity, oracle proximity."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .cost import CoreCost, CostParams, edp
from .exact import (MembraneState, QuantConfig, ann_column_eval, hybrid_gemm, snn_column_eval,
                    soft_reset_update)
from .scheduler import (brute_force_min_edp, pack_assignment, schedule_cost, stage1_split,
                        stage2_refine, tune_lambda)
from .sparse import BitmapMatrix, COL_MAJOR, compress

ORACLE_SPLITS = ((16, 16), (8, 8), (6, 10), (10, 6))


@dataclass
class SuiteResult:
    name: str
    passed: bool
    checked: int
    failures: int
    detail: dict = field(default_factory=dict)

    def to_dict(self):
        return {"name": self.name, "passed": self.passed, "checked": self.checked,
                "failures": self.failures, "detail": self.detail}

    def line(self) -> str:
        extra = ", ".join(f"{k}={v}" for k, v in sorted(self.detail.items()) if not isinstance(v, (list, dict)))
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.checked} checked, {self.failures} failed" + (
            f" ({extra})" if extra else "")


def faulty_soft_reset(state: MembraneState, cfg: QuantConfig) -> int:
    """Soft reset without the half-step bias; floors where QCFS rounds."""
    v = state.potential
    emitted = 0
    for _ in range(cfg.L):
        if v >= cfg.step:
            v -= cfg.step
            emitted += 1
    return emitted


def _random_column(rng, L):
    K = int(rng.integers(1, 257))
    da, dw = rng.uniform(0.1, 0.9, 2)
    a = np.where(rng.random(K) < da, rng.integers(1, L + 1, K), 0).astype(np.int8)
    w = np.where(rng.random(K) < dw, rng.integers(-127, 128, K), 0).astype(np.int8)
    return compress(a), compress(w)


def equivalence_suite(n_columns: int = 10_000, seed: int = 0, soft_reset=soft_reset_update,
                      exhaustive_k: int = 4) -> SuiteResult:
    """SNN path against ANN path on random columns plus every L=2 column up to ``exhaustive_k``."""
    rng = np.random.default_rng(seed)
    failures, checked, example = 0, 0, None
    for _ in range(n_columns):
        L = int(rng.choice([2, 4, 8]))
        cfg = QuantConfig(L, L * int(rng.choice([1, 2, 3, 4, 8])))
        a, w = _random_column(rng, L)
        checked += 1
        if snn_column_eval(a, w, cfg, soft_reset) != ann_column_eval(a, w, cfg):
            failures += 1
            example = example or {"L": L, "theta": cfg.theta, "K": a.length}
    # step 2 with weights up to +-3 drives L=2 past both clip edges
    cfg = QuantConfig(2, 4)
    weights = range(-3, 4)
    for K in range(1, exhaustive_k + 1):
        for a_vals in itertools.product(range(3), repeat=K):
            a = compress(np.array(a_vals, dtype=np.int8))
            for w_vals in itertools.product(weights, repeat=K):
                w = compress(np.array(w_vals, dtype=np.int8))
                checked += 1
                if snn_column_eval(a, w, cfg, soft_reset) != ann_column_eval(a, w, cfg):
                    failures += 1
                    example = example or {"L": 2, "a": list(a_vals), "w": list(w_vals)}
    detail = {"random": n_columns, "exhaustive_max_k": exhaustive_k}
    if example:
        detail["first_failure"] = example
    return SuiteResult("equivalence", failures == 0, checked, failures, detail)


def mask_invariance_suite(instances: int = 10, masks: int = 25, seed: int = 0,
                          shape=(16, 64, 16), cfg: QuantConfig = QuantConfig()) -> SuiteResult:
    """hybrid_gemm output must not depend on which columns run in SNN mode."""
    rng = np.random.default_rng(seed)
    M, K, N = shape
    failures = 0
    for _ in range(instances):
        a = np.where(rng.random((M, K)) < 0.5, rng.integers(1, cfg.L + 1, (M, K)), 0).astype(np.int8)
        b = np.where(rng.random((K, N)) < 0.5, rng.integers(-127, 128, (K, N)), 0).astype(np.int8)
        A, B = BitmapMatrix.from_dense(a), BitmapMatrix.from_dense(b, COL_MAJOR)
        ref = hybrid_gemm(A, B, np.zeros(N, bool), cfg)
        for _ in range(masks):
            if hybrid_gemm(A, B, rng.random(N) < 0.5, cfg) != ref:
                failures += 1
    return SuiteResult("mask_invariance", failures == 0, instances * masks, failures,
                       {"shape": list(shape)})


def random_params(rng, split=(16, 16)) -> CostParams:
    """Cost coefficients with per-match energy ratios spanning 10x."""
    snn = CoreCost(rng.uniform(0.5, 5), rng.uniform(0, 30), rng.uniform(1, 2), rng.uniform(0, 40),
                   rng.uniform(0, 20), split[0])
    ann = CoreCost(5.0, rng.uniform(0, 30), 1.0, rng.uniform(0, 20), rng.uniform(0, 20), split[1])
    return CostParams(snn, ann)


def phi_monotone_suite(instances: int = 40, seed: int = 0) -> SuiteResult:
    """Every Stage-2 trace is non-increasing and ends no worse than Stage 1."""
    rng = np.random.default_rng(seed)
    failures, checked = 0, 0
    for _ in range(instances):
        n = int(rng.integers(2, 80))
        r = rng.gamma(2.0, 60.0, n)
        p = random_params(rng, (int(rng.integers(1, 9)), int(rng.integers(1, 9))))
        p = p.with_lambda(float(rng.choice([0.01, 1.0, 100.0])))
        start = pack_assignment(stage1_split(r, p).to_snn, r, p)
        for repack in ("full", "incremental"):
            for moves in ("single", "ranked"):
                _, rep = stage2_refine(start, r, p, max_passes=10, repack=repack, moves=moves)
                checked += 1
                phi = rep.phi
                if any(b > a * (1 + 1e-12) + 1e-9 for a, b in zip(phi, phi[1:])):
                    failures += 1
    return SuiteResult("phi_monotone", failures == 0, checked, failures)


def oracle_instances(count: int = 100, seed: int = 0):
    """(r_hat, params) pairs with n <= 12 over the reference core splits."""
    rng = np.random.default_rng(seed)
    for t in range(count):
        n = int(rng.integers(2, 13))
        r = rng.integers(0, 300, n).astype(float)
        yield r, random_params(rng, ORACLE_SPLITS[t % len(ORACLE_SPLITS)])


def oracle_proximity_suite(instances: int = 100, seed: int = 0, tol: float = 1.05,
                           required: int = 95) -> SuiteResult:
    ratios = []
    for r, p in oracle_instances(instances, seed):
        tuned, _, _ = tune_lambda(r, p)
        s = schedule_cost(r, tuned)
        _, best = brute_force_min_edp(r, p)
        got = edp(s.assignment(), r, p)
        ratios.append(got / best if best > 0 else (1.0 if got == 0 else np.inf))
    ok = sum(x <= tol for x in ratios)
    return SuiteResult("oracle_proximity", ok >= required, instances, instances - ok,
                       {"within": ok, "required": required, "tolerance": tol,
                        "max_edp_gap": round(float(max(ratios)) - 1.0, 6)})


def run_all(seed: int = 0, inject_fault: bool = False, n_columns: int = 2000) -> list[SuiteResult]:
    soft_reset = faulty_soft_reset if inject_fault else soft_reset_update
    return [
        equivalence_suite(n_columns, seed, soft_reset),
        mask_invariance_suite(seed=seed),
        phi_monotone_suite(seed=seed),
        oracle_proximity_suite(seed=seed),
    ]
