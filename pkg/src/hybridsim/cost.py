"""Analytic per-layer energy / latency model and the E + lambda*D surrogate.

Each column ``i`` carries a robust match count ``r_hat[i]``. On core ``a``
it costs ``e_a = eps_a * r + zeta_a`` energy and ``l_a = beta_a * r + delta_a``
latency. Energy is additive over columns; a core's latency is its launch
overhead plus the most loaded PE; the layer delay is the slower core.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, replace
from fractions import Fraction

import numpy as np

from .errors import CapacityError, StructuralError

CORES = ("snn", "ann")


@dataclass(frozen=True)
class CoreCost:
    eps: float
    zeta: float
    beta: float
    delta: float
    alpha: float = 0.0
    pes: int = 16

    def __post_init__(self):
        for name in ("eps", "zeta", "beta", "delta", "alpha", "pes"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def energy(self, r):
        return self.eps * np.asarray(r, dtype=float) + self.zeta

    def latency(self, r):
        return self.beta * np.asarray(r, dtype=float) + self.delta

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class CostParams:
    snn: CoreCost
    ann: CoreCost
    lam: float = 1.0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")

    def core(self, name: str) -> CoreCost:
        return self.snn if name == "snn" else self.ann

    def with_lambda(self, lam: float) -> CostParams:
        return replace(self, lam=float(lam))

    def with_pes(self, snn_pes: int, ann_pes: int) -> CostParams:
        return replace(self, snn=replace(self.snn, pes=snn_pes), ann=replace(self.ann, pes=ann_pes))

    def to_dict(self):
        return {"snn": self.snn.to_dict(), "ann": self.ann.to_dict(), "lambda": self.lam}

    @classmethod
    def from_dict(cls, d) -> CostParams:
        return cls(CoreCost(**d["snn"]), CoreCost(**d["ann"]), float(d.get("lambda", 1.0)))

    def digest(self) -> str:
        return stable_digest(self.to_dict())


def stable_digest(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(eq=False)
class ColumnStats:
    samples: np.ndarray   # (n, S) match counts per column and validation sample
    r_hat: np.ndarray     # (n,)
    q: float = 0.9

    @property
    def n(self) -> int:
        return int(self.r_hat.shape[0])

    def digest(self) -> str:
        return stable_digest({"r_hat": [float(x) for x in self.r_hat], "q": self.q})

    def to_dict(self):
        return {"q": self.q, "r_hat": self.r_hat.tolist(), "samples": self.samples.tolist()}

    @classmethod
    def from_dict(cls, d) -> ColumnStats:
        return cls(np.asarray(d["samples"], dtype=float).reshape(len(d["r_hat"]), -1),
                   np.asarray(d["r_hat"], dtype=float), float(d["q"]))

    @classmethod
    def from_rhat(cls, r_hat, q=0.9) -> ColumnStats:
        r = np.asarray(r_hat, dtype=float).reshape(-1)
        return cls(r[:, None].copy(), r, q)


def _order_index(q: float, s: int) -> int:
    # ceil(q * S) in exact arithmetic, as a 0-based index
    k = math.ceil(Fraction(q).limit_denominator(10**9) * s)
    return min(max(k, 1), s) - 1


def quantile_stats(samples, q: float = 0.9) -> ColumnStats:
    """Per-column lower order statistic at rank ceil(q*S)."""
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    rows = [np.asarray(s, dtype=float).reshape(-1) for s in samples]
    if not rows or any(r.size == 0 for r in rows):
        raise ValueError("every column needs at least one sample")
    if any(np.any(r < 0) for r in rows):
        raise ValueError("match counts must be non-negative")
    r_hat = np.array([np.sort(r)[_order_index(q, r.size)] for r in rows])
    sizes = {r.size for r in rows}
    arr = np.stack(rows) if len(sizes) == 1 else np.array(rows, dtype=object)
    return ColumnStats(arr, r_hat, q)


def per_column_cost(r_hat_i, core: CoreCost):
    return core.energy(r_hat_i), core.latency(r_hat_i)


@dataclass(eq=False)
class Assignment:
    to_snn: np.ndarray
    snn_packing: list | None = None
    ann_packing: list | None = None

    def __post_init__(self):
        self.to_snn = np.asarray(self.to_snn, dtype=bool).reshape(-1)

    @property
    def n(self) -> int:
        return int(self.to_snn.shape[0])

    def columns(self, core: str) -> np.ndarray:
        return np.flatnonzero(self.to_snn if core == "snn" else ~self.to_snn)

    def packing(self, core: str):
        return self.snn_packing if core == "snn" else self.ann_packing

    @property
    def packed(self) -> bool:
        return self.snn_packing is not None and self.ann_packing is not None

    def validate(self):
        for core in CORES:
            pack = self.packing(core)
            if pack is None:
                continue
            placed = sorted(c for pe in pack for c in pe)
            if placed != self.columns(core).tolist():
                raise StructuralError(f"{core} packing does not partition its columns")

    def key(self) -> tuple:
        return tuple(bool(x) for x in self.to_snn)


def _r_hat(stats) -> np.ndarray:
    if isinstance(stats, ColumnStats):
        return stats.r_hat
    return np.asarray(stats, dtype=float).reshape(-1)


def layer_energy(assign: Assignment, stats, params: CostParams) -> float:
    r = _r_hat(stats)
    if assign.n != r.shape[0]:
        raise StructuralError(f"assignment covers {assign.n} columns, layer has {r.shape[0]}")
    m = assign.to_snn
    return float(params.snn.energy(r[m]).sum() + params.ann.energy(r[~m]).sum())


def core_makespan(assign: Assignment, stats, core: str, params: CostParams) -> float:
    r = _r_hat(stats)
    cc = params.core(core)
    pack = assign.packing(core)
    cols = assign.columns(core)
    if pack is None:
        if cols.size:
            raise StructuralError(f"{core} core has columns but no packing")
        return float(cc.alpha)
    if len(pack) > cc.pes and any(len(pe) for pe in pack[cc.pes:]):
        raise CapacityError(f"{core} packing uses {len(pack)} PEs, core has {cc.pes}")
    placed = [c for pe in pack for c in pe]
    if any(c < 0 or c >= r.shape[0] for c in placed):
        raise StructuralError("packing references an unknown column")
    if sorted(placed) != cols.tolist():
        raise StructuralError(f"{core} packing does not partition its columns")
    loads = [float(cc.latency(r[list(pe)]).sum()) if pe else 0.0 for pe in pack]
    return float(cc.alpha + max(loads, default=0.0))


def layer_delay(assign: Assignment, stats, params: CostParams) -> float:
    return max(core_makespan(assign, stats, "snn", params), core_makespan(assign, stats, "ann", params))


def edp(assign: Assignment, stats, params: CostParams) -> float:
    return layer_energy(assign, stats, params) * layer_delay(assign, stats, params)


def surrogate_phi(assign: Assignment, stats, params: CostParams) -> float:
    return layer_energy(assign, stats, params) + params.lam * layer_delay(assign, stats, params)
