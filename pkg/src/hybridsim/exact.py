"""Integer-exact column semantics for ANN and SNN execution.

Both modes consume INT8 operands and produce an activation level in
``[0, L]``. The ANN path does a sparse MAC followed by QCFS; the SNN path
regenerates a thermometer spike train for every matched activation,
accumulates per-timestep partial sums, integrates them into a membrane and
finishes with ``L`` soft-reset fire steps. The two must agree bit-exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, NewType, Sequence

import numpy as np

from .errors import (AccumulatorOverflow, DimensionError, PreconditionError,
                     RangeError)
from .sparse import BitmapMatrix, BitmapVector, COL_MAJOR, ROW_MAJOR

INT32_MIN = -(1 << 31)
INT32_MAX = (1 << 31) - 1
INT8_MIN, INT8_MAX = -128, 127
VALID_LEVELS = (2, 4, 8)

ANN = 0
SNN = 1

ActivationLevel = NewType("ActivationLevel", int)


@dataclass(frozen=True)
class QuantConfig:
    L: int = 8
    theta: int = 16

    def __post_init__(self):
        if self.L not in VALID_LEVELS:
            raise ValueError(f"L must be one of {VALID_LEVELS}, got {self.L}")
        if self.theta % self.L:
            raise PreconditionError(f"theta/L not integer (theta={self.theta}, L={self.L})")
        if self.theta // self.L < 1:
            raise PreconditionError("quantization step theta/L must be >= 1")

    @property
    def step(self) -> int:
        return self.theta // self.L

    @property
    def T(self) -> int:
        return self.L

    @property
    def total_timesteps(self) -> int:
        # lossless conversion window; only latency accounting uses it
        return 3 * self.L - 1

    def to_dict(self):
        return {"L": self.L, "theta": self.theta}


@dataclass(frozen=True)
class MembraneState:
    potential: int = 0
    emitted: int = 0


def _check_int32(value: int):
    if value < INT32_MIN or value > INT32_MAX:
        raise AccumulatorOverflow(f"accumulator value {value} exceeds signed 32-bit range")


def qcfs(acc: int, cfg: QuantConfig) -> ActivationLevel:
    step = cfg.step
    level = (int(acc) + step // 2) // step
    return ActivationLevel(min(max(level, 0), cfg.L))


def spike_gen(level: int, cfg: QuantConfig) -> np.ndarray:
    """Thermometer spike train: ones for the first ``level`` timesteps."""
    if not 0 <= level <= cfg.L:
        raise ValueError(f"activation level {level} outside [0, {cfg.L}]")
    return (np.arange(cfg.T) < level).astype(np.uint8)


def spike_count_step(state: MembraneState, o_t: int) -> MembraneState:
    potential = state.potential + int(o_t)
    _check_int32(potential)
    return MembraneState(potential, state.emitted)


def soft_reset_update(state: MembraneState, cfg: QuantConfig) -> ActivationLevel:
    # Half-step bias stands in for the QCFS shift; each of the L steps fires
    # at most once and subtracts the threshold step from the membrane.
    v = state.potential + cfg.step // 2
    emitted = 0
    for _ in range(cfg.L):
        if v >= cfg.step:
            v -= cfg.step
            emitted += 1
    return ActivationLevel(emitted)


def _matched(a_row: BitmapVector, w_col: BitmapVector):
    if a_row.length != w_col.length:
        raise DimensionError(f"fiber lengths differ: {a_row.length} vs {w_col.length}")
    both = a_row.bits & w_col.bits
    a_idx = np.cumsum(a_row.bits)[both] - 1
    w_idx = np.cumsum(w_col.bits)[both] - 1
    return a_row.values[a_idx].astype(np.int64), w_col.values[w_idx].astype(np.int64)


def _check_levels(levels: np.ndarray, cfg: QuantConfig):
    if levels.size and (levels.min() < 0 or levels.max() > cfg.L):
        raise ValueError(f"activation levels must lie in [0, {cfg.L}]")


def _checked_sum(terms: np.ndarray) -> int:
    if terms.size == 0:
        return 0
    if int(np.abs(terms).sum()) > INT32_MAX:
        partial = np.cumsum(terms)
        bad = (partial > INT32_MAX) | (partial < INT32_MIN)
        if bad.any():
            raise AccumulatorOverflow(f"partial sum {int(partial[bad.argmax()])} exceeds signed 32-bit range")
    return int(terms.sum())


def ann_column_eval(a_row: BitmapVector, w_col: BitmapVector, cfg: QuantConfig) -> ActivationLevel:
    a, w = _matched(a_row, w_col)
    _check_levels(a, cfg)
    return qcfs(_checked_sum(a * w), cfg)


SoftReset = Callable[[MembraneState, QuantConfig], int]


def snn_column_eval(a_row: BitmapVector, w_col: BitmapVector, cfg: QuantConfig,
                    soft_reset: SoftReset = soft_reset_update) -> ActivationLevel:
    a, w = _matched(a_row, w_col)
    _check_levels(a, cfg)
    # Thermometer trains: matched position k spikes at timestep t iff a[k] > t,
    # so O[t] gathers the weights of every position still spiking at t.
    o = np.zeros(cfg.T, dtype=np.int64)
    for t in range(cfg.T):
        o[t] = _checked_sum(w[a > t])
    state = MembraneState()
    for t in range(cfg.T):
        state = spike_count_step(state, int(o[t]))
    return ActivationLevel(soft_reset(state, cfg))


def _mask_array(mask, n: int) -> np.ndarray:
    arr = np.asarray(mask).reshape(-1)
    if arr.dtype.kind in "US":
        arr = np.array([str(x).upper() == "SNN" for x in arr])
    arr = arr.astype(bool)
    if arr.shape[0] != n:
        raise DimensionError(f"mode mask has {arr.shape[0]} entries, expected {n}")
    return arr


def _qcfs_array(acc: np.ndarray, cfg: QuantConfig) -> np.ndarray:
    step = cfg.step
    return np.clip((acc + step // 2) // step, 0, cfg.L)


def _soft_reset_array(potential: np.ndarray, cfg: QuantConfig) -> np.ndarray:
    v = potential + cfg.step // 2
    emitted = np.zeros_like(potential)
    for _ in range(cfg.L):
        fire = v >= cfg.step
        v = np.where(fire, v - cfg.step, v)
        emitted += fire
    return emitted


def _check_partial_range(a: np.ndarray, b: np.ndarray):
    """Raise if any running column sum of ``a @ b`` can leave the int32 range."""
    if a.size == 0 or b.size == 0:
        return
    bound = np.abs(a) @ np.abs(b)
    if bound.max() <= INT32_MAX:
        return
    for n in range(b.shape[1]):
        partial = np.cumsum(a * b[:, n][None, :], axis=1)
        if partial.max() > INT32_MAX or partial.min() < INT32_MIN:
            raise AccumulatorOverflow("column accumulation exceeds signed 32-bit range")


def hybrid_gemm_dense(a: np.ndarray, b: np.ndarray, mask, cfg: QuantConfig) -> np.ndarray:
    """Dense-array form of :func:`hybrid_gemm`; returns the (M, N) level matrix."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    _check_levels(a, cfg)
    m, _ = a.shape
    n = b.shape[1]
    modes = _mask_array(mask, n)
    out = np.zeros((m, n), dtype=np.int64)

    ann_cols = np.flatnonzero(~modes)
    if ann_cols.size:
        bw = b[:, ann_cols]
        _check_partial_range(a, bw)
        out[:, ann_cols] = _qcfs_array(a @ bw, cfg)

    snn_cols = np.flatnonzero(modes)
    if snn_cols.size:
        bw = b[:, snn_cols]
        # spikes[m, k, t]; zero activations emit no spikes, so unmatched
        # positions contribute nothing to O.
        spikes = (np.arange(cfg.T)[None, None, :] < a[:, :, None]).astype(np.int64)
        _check_partial_range(a, bw)
        o = np.einsum("mkt,kn->mnt", spikes, bw)
        potential = o.sum(axis=2)
        out[:, snn_cols] = _soft_reset_array(potential, cfg)
    return out.astype(np.int8)


def hybrid_gemm(A: BitmapMatrix, B: BitmapMatrix, mask, cfg: QuantConfig) -> BitmapMatrix:
    if A.cols != B.rows:
        raise DimensionError(f"A is {A.rows}x{A.cols} but B is {B.rows}x{B.cols}")
    c = hybrid_gemm_dense(A.to_dense(), B.to_dense(), mask, cfg)
    return BitmapMatrix.from_dense(c, ROW_MAJOR)


def hybrid_gemm_reference(A: BitmapMatrix, B: BitmapMatrix, mask, cfg: QuantConfig) -> BitmapMatrix:
    """Element-by-element evaluation through the scalar column paths."""
    if A.cols != B.rows:
        raise DimensionError(f"A is {A.rows}x{A.cols} but B is {B.rows}x{B.cols}")
    rows = A if A.layout == ROW_MAJOR else BitmapMatrix.from_dense(A.to_dense(), ROW_MAJOR)
    cols = B if B.layout == COL_MAJOR else BitmapMatrix.from_dense(B.to_dense(), COL_MAJOR)
    modes = _mask_array(mask, B.cols)
    c = np.zeros((A.rows, B.cols), dtype=np.int8)
    for n, w_col in enumerate(cols.fibers):
        evaluate = snn_column_eval if modes[n] else ann_column_eval
        for m, a_row in enumerate(rows.fibers):
            c[m, n] = evaluate(a_row, w_col, cfg)
    return BitmapMatrix.from_dense(c, ROW_MAJOR)


# ---------------------------------------------------------------------------
# divisibility conditions


@dataclass
class ValidityReport:
    ok: bool
    violations: list = field(default_factory=list)

    def __bool__(self):
        return self.ok


def check_input_layer(L, theta=None) -> ValidityReport:
    """Input-layer conditions: theta/L integral and theta representable in INT8."""
    if isinstance(L, QuantConfig):
        L, theta = L.L, L.theta
    violations = []
    if theta % L:
        violations.append("theta/L not integer")
    if not INT8_MIN <= theta <= INT8_MAX:
        violations.append(f"theta={theta} outside INT8 range")
    return ValidityReport(not violations, violations)


@dataclass(frozen=True)
class BatchNormParams:
    gamma: float
    beta: int
    mu: int
    sigma_sq: float
    eps: float = 0.0
    b: int = 0


def _exact_ratio(gamma, sigma_sq, eps) -> Fraction:
    denom_sq = Fraction(sigma_sq) + Fraction(eps)
    if denom_sq <= 0:
        raise PreconditionError("sigma^2 + eps must be positive")
    num, den = denom_sq.numerator, denom_sq.denominator
    rn, rd = math.isqrt(num), math.isqrt(den)
    if rn * rn == num and rd * rd == den:
        return Fraction(gamma) / Fraction(rn, rd)
    # irrational root: accept only when the float ratio is integral
    ratio = float(gamma) / math.sqrt(float(denom_sq))
    nearest = round(ratio)
    if abs(ratio - nearest) > 1e-9 * max(1.0, abs(ratio)):
        raise PreconditionError(f"gamma/sqrt(sigma^2+eps)={ratio} not integer")
    return Fraction(nearest)


def fold_batchnorm(p: BatchNormParams, cfg: QuantConfig) -> tuple[int, int]:
    """Fold MatMul + BatchNorm into an integer affine ``scale * (z*W) + offset``."""
    L = cfg.L
    quantities = {"b": p.b, "mu": p.mu, "beta": p.beta}
    for name, value in quantities.items():
        if Fraction(value) % L:
            raise PreconditionError(f"{name}/L not integer ({name}={value}, L={L})")
    scale = _exact_ratio(p.gamma, p.sigma_sq, p.eps)
    if scale.denominator != 1:
        raise PreconditionError(f"gamma/sqrt(sigma^2+eps)={scale} not integer")
    checks = {name: Fraction(v) / L for name, v in quantities.items()}
    checks["gamma/sqrt(sigma^2+eps)"] = scale
    for name, value in checks.items():
        if not INT8_MIN <= value <= INT8_MAX:
            raise RangeError(f"{name} = {value} outside INT8 range")
    scale_i = int(scale)
    offset = scale_i * (int(p.b) - int(p.mu)) + int(p.beta)
    return scale_i, offset


def apply_fold(z_dot_w, scale: int, offset: int):
    return scale * np.asarray(z_dot_w, dtype=np.int64) + offset


def mode_mask(modes: Sequence) -> np.ndarray:
    """Normalize 'ANN'/'SNN' strings or 0/1 flags into a bool array (True = SNN)."""
    return _mask_array(modes, len(modes))
