"""Cycle-level model of the dual-core accelerator.

Work is split into dot-product tasks ``(row m, column n)``. A PE runs the
tasks of its columns back to back, row by row. Task latency follows the PE
pipeline formulas (:func:`ann_pe_cycles`, :func:`snn_pe_cycles`); on top of
that every chunk reads its A and B cache lines, and a PE stalls when its
bank is already serving a different line that cycle or when the line is not
cache resident. Energy is event counts times per-event weights.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources

import numpy as np

from .cost import CoreCost, CostParams
from .errors import CalibrationError, StructuralError
from .exact import QuantConfig, hybrid_gemm_dense
from .scheduler import Schedule, pack_assignment
from .sparse import BitmapMatrix, CHUNK_BITS, BEAT_VALUES

CALIBRATION_COUNTS = (0, 16, 64, 256, 1024)
BITMAP_BYTES = CHUNK_BITS // 8


@dataclass(frozen=True)
class HardwareConfig:
    snn_pes: int = 16
    ann_pes: int = 16
    cache_bytes: int = 512 * 1024
    cache_banks: int = 32
    cache_assoc: int = 32
    chunk_bits: int = 128
    line_bytes: int = 64
    hbm_bytes_per_second: float = 128e9
    clock_hz: float = 560e6
    inner_join_units: int = 32
    launch_cycles: int = 10
    hbm_latency: int = 100
    warmup_per_chunk: bool = False

    def __post_init__(self):
        if self.chunk_bits != CHUNK_BITS:
            raise ValueError("chunk_bits must be 128")
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name in ("snn_pes", "ann_pes", "launch_cycles", "warmup_per_chunk"):
                if v < 0:
                    raise ValueError(f"{f.name} must be non-negative")
            elif not v > 0:
                raise ValueError(f"{f.name} must be positive")

    @property
    def hbm_bytes_per_cycle(self) -> float:
        return self.hbm_bytes_per_second / self.clock_hz

    @property
    def total_pes(self) -> int:
        return self.snn_pes + self.ann_pes

    def pes(self, core: str) -> int:
        return self.snn_pes if core == "snn" else self.ann_pes

    def with_pes(self, snn_pes: int, ann_pes: int) -> HardwareConfig:
        return replace(self, snn_pes=snn_pes, ann_pes=ann_pes)

    def transfer_cycles(self, nbytes: float) -> int:
        return int(math.ceil(nbytes / self.hbm_bytes_per_cycle))

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d) -> HardwareConfig:
        return cls(**d)


@dataclass(frozen=True)
class EnergyWeights:
    cache_access: float = 1.0
    hbm_byte: float = 1.0
    crossbar_beat: float = 0.1
    fast_prefix: float = 0.1
    laggy_prefix: float = 0.1
    mac: float = 0.1
    gated_acc: float = 0.01
    spike_gen: float = 0.01
    qcfs: float = 0.01
    soft_reset: float = 0.01
    control_ann: float = 0.01
    control_snn: float = 0.01

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be non-negative")

    # activation units of the plain variants, relative to the exact ones
    @property
    def relu(self) -> float:
        return 0.8 * self.qcfs

    @property
    def lif(self) -> float:
        return 0.4 * self.soft_reset

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d) -> EnergyWeights:
        return cls(**{k: float(v) for k, v in d.items() if k in {f.name for f in fields(cls)}})

    @classmethod
    def default(cls) -> EnergyWeights:
        text = resources.files("hybridsim").joinpath("defaults/energy_weights.json").read_text()
        return cls.from_dict(json.loads(text)["weights"])


# energy component -> (event, weight field)
COMPONENTS = {
    "cache.access": ("cache_access", "cache_access"),
    "cache.crossbar": ("crossbar_beat", "crossbar_beat"),
    "cache.hbm": ("hbm_byte", "hbm_byte"),
    "ann.prefix": ("ann_fast_prefix", "fast_prefix"),
    "ann.mac": ("mac", "mac"),
    "ann.activation": ("qcfs", "qcfs"),
    "ann.other": ("ann_busy", "control_ann"),
    "snn.prefix": ("snn_fast_prefix", "fast_prefix"),
    "snn.laggy_prefix": ("laggy_prefix", "laggy_prefix"),
    "snn.spike_gen": ("spike_gen", "spike_gen"),
    "snn.accumulate": ("gated_acc", "gated_acc"),
    "snn.soft_reset": ("soft_reset", "soft_reset"),
    "snn.other": ("snn_busy", "control_snn"),
}
EVENTS = sorted({ev for ev, _ in COMPONENTS.values()})

GROUPS = {
    "system": {"cache": ("cache.access", "cache.crossbar", "cache.hbm"),
               "ann": ("ann.prefix", "ann.mac", "ann.activation", "ann.other"),
               "snn": ("snn.prefix", "snn.laggy_prefix", "snn.spike_gen", "snn.accumulate",
                       "snn.soft_reset", "snn.other")},
    "ann": {"prefix": ("ann.prefix",), "mac_acc": ("ann.mac",), "activation": ("ann.activation",),
            "other": ("ann.other",)},
    "snn": {"prefix": ("snn.prefix", "snn.laggy_prefix"), "mac_acc": ("snn.accumulate",),
            "activation": ("snn.spike_gen", "snn.soft_reset"), "other": ("snn.other",)},
    "cache": {"access": ("cache.access",), "crossbar": ("cache.crossbar",), "hbm": ("cache.hbm",)},
}


def energy_from_events(events: dict, weights: EnergyWeights) -> dict:
    return {comp: float(events.get(ev, 0)) * getattr(weights, w) for comp, (ev, w) in COMPONENTS.items()}


# ---------------------------------------------------------------------------
# PE pipelines


def _warmup(chunks: int, per_chunk: bool) -> int:
    return 2 * max(chunks, 1) if per_chunk else 2


def ann_pe_cycles(match_counts_per_chunk, per_chunk_warmup: bool = False) -> int:
    """Warm-up, one matched nonzero per cycle, a bubble between chunks, one QCFS stage."""
    counts = list(match_counts_per_chunk)
    chunks = max(len(counts), 1)
    return _warmup(chunks, per_chunk_warmup) + int(sum(counts)) + (chunks - 1) + 1


def snn_pe_cycles(match_counts_per_chunk, cfg: QuantConfig, per_chunk_warmup: bool = False) -> int:
    """ANN-style streaming plus an 8-cycle laggy-prefix fill and the L-1 / L epilogues."""
    counts = list(match_counts_per_chunk)
    chunks = max(len(counts), 1)
    return (_warmup(chunks, per_chunk_warmup) + 8 + int(sum(counts)) + (chunks - 1)
            + (cfg.L - 1) + cfg.L)


# ---------------------------------------------------------------------------
# jobs and reports


def _dense(x) -> np.ndarray:
    if isinstance(x, BitmapMatrix):
        return x.to_dense()
    return np.asarray(x, dtype=np.int8)


class LayerJob:
    """Operands, quantization and the schedule slice for one layer."""

    def __init__(self, A, B, cfg: QuantConfig, schedule: Schedule, name: str = ""):
        self.A = _dense(A)
        self.B = _dense(B)
        self.cfg = cfg
        self.schedule = schedule
        self.name = name
        if self.A.ndim != 2 or self.B.ndim != 2 or self.A.shape[1] != self.B.shape[0]:
            raise StructuralError(f"operand shapes {self.A.shape} and {self.B.shape} do not chain")
        if schedule.n != self.B.shape[1]:
            raise StructuralError(f"schedule covers {schedule.n} columns, layer has {self.B.shape[1]}")
        schedule.assignment().validate()

    @property
    def shape(self):
        return self.A.shape[0], self.A.shape[1], self.B.shape[1]

    def operand_bytes(self):
        """Compressed bytes of A (row fibers) and B (column fibers)."""
        M, K, N = self.shape
        fiber = -(-K // 8)
        return (M * fiber + int(np.count_nonzero(self.A)), N * fiber + int(np.count_nonzero(self.B)))


@dataclass
class SimReport:
    total_cycles: int
    pe_busy: dict
    energy: dict
    events: dict
    stalls: dict = field(default_factory=dict)
    column_matches: np.ndarray | None = None
    output: np.ndarray | None = None
    compute_cycles: int = 0
    fill_cycles: int = 0
    layers: list = field(default_factory=list)
    name: str = ""

    @property
    def total_energy(self) -> float:
        return math.fsum(self.energy.values())

    @property
    def total_pes(self) -> int:
        return sum(len(v) for v in self.pe_busy.values())

    @property
    def edp(self) -> float:
        return self.total_energy * self.total_cycles

    def busy_total(self) -> int:
        return int(sum(int(np.sum(v)) for v in self.pe_busy.values()))

    def idle(self) -> dict:
        return {core: self.total_cycles - np.asarray(v) for core, v in self.pe_busy.items()}

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "total_cycles": int(self.total_cycles),
            "compute_cycles": int(self.compute_cycles),
            "fill_cycles": int(self.fill_cycles),
            "pe_busy": {k: [int(x) for x in v] for k, v in self.pe_busy.items()},
            "energy": {k: float(v) for k, v in self.energy.items()},
            "events": {k: int(v) for k, v in self.events.items()},
            "stalls": {k: int(v) for k, v in self.stalls.items()},
            "total_energy": self.total_energy,
            "edp": self.edp,
            "utilization": utilization(self),
        }
        if self.layers:
            d["layers"] = [layer.to_dict() for layer in self.layers]
        return d

    def metric_rows(self) -> list:
        rows = [("total_cycles", self.total_cycles), ("total_energy", self.total_energy),
                ("edp", self.edp), ("utilization", utilization(self))]
        rows += [(f"energy.{k}", v) for k, v in sorted(self.energy.items())]
        rows += [(f"stalls.{k}", v) for k, v in sorted(self.stalls.items())]
        for group, shares in power_breakdown(self).items():
            rows += [(f"share.{group}.{k}", v) for k, v in shares.items()]
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric", "value"])
        for k, v in self.metric_rows():
            w.writerow([k, repr(float(v))])
        return buf.getvalue()


# ---------------------------------------------------------------------------
# layer simulation


def _chunk_matches(a_bits: np.ndarray, b_bits: np.ndarray, chunks: int) -> np.ndarray:
    """(M, N, chunks) matched-nonzero counts per task and chunk."""
    M, K = a_bits.shape
    N = b_bits.shape[1]
    out = np.zeros((M, N, chunks), dtype=np.int64)
    for j in range(chunks):
        s = slice(j * CHUNK_BITS, min((j + 1) * CHUNK_BITS, K))
        out[:, :, j] = a_bits[:, s].astype(np.int32) @ b_bits[s, :].astype(np.int32)
    return out


def _chunk_nnz(bits: np.ndarray, chunks: int) -> np.ndarray:
    """(fibers, chunks) nonzeros per chunk; ``bits`` is (fibers, K)."""
    F, K = bits.shape
    pad = np.zeros((F, chunks * CHUNK_BITS), dtype=np.int64)
    pad[:, :K] = bits
    return pad.reshape(F, chunks, CHUNK_BITS).sum(axis=2)


def _lines(nnz: np.ndarray, line_bytes: int) -> np.ndarray:
    # bitmap window plus packed values, continuation lines when it overflows
    return -(-(BITMAP_BYTES + nnz) // line_bytes)


def _beats(nnz: np.ndarray) -> np.ndarray:
    return 1 + -(-nnz // BEAT_VALUES)


def _resident(a_lines, b_lines, M, N, hw: HardwareConfig) -> np.ndarray:
    """Static resident set: lines ranked by use count, half the cache (double buffered)."""
    n_a, n_b = int(a_lines.sum()), int(b_lines.sum())
    capacity = (hw.cache_bytes // 2) // hw.line_bytes
    uses = np.concatenate([np.full(n_a, N), np.full(n_b, M)])
    order = np.lexsort((np.arange(n_a + n_b), -uses))
    resident = np.zeros(n_a + n_b, dtype=bool)
    resident[order[:capacity]] = True
    return resident


def _pe_order(hw: HardwareConfig):
    # static bank-arbitration priority: ANN0, SNN0, ANN1, SNN1, ...
    order = []
    for p in range(max(hw.ann_pes, hw.snn_pes)):
        if p < hw.ann_pes:
            order.append(("ann", p))
        if p < hw.snn_pes:
            order.append(("snn", p))
    return order


def simulate_layer(job: LayerJob, hw: HardwareConfig, weights: EnergyWeights, *,
                   memory: bool = True, compute_values: bool = True) -> SimReport:
    """Cycle and energy model of one layer under its schedule.

    ``memory=False`` drops bank-conflict and miss stalls (pure pipeline
    timing); event counts are unaffected.
    """
    sched = job.schedule
    M, K, N = job.shape
    cfg = job.cfg
    packs = {"snn": sched.snn_packing, "ann": sched.ann_packing}
    for core in ("snn", "ann"):
        used = sum(1 for pe in packs[core] if pe)
        if used and len(packs[core]) > hw.pes(core) and any(packs[core][hw.pes(core):]):
            raise StructuralError(f"{core} packing needs more PEs than the hardware has")
    chunks = max(-(-K // CHUNK_BITS), 1)
    a_bits = job.A != 0
    b_bits = job.B != 0
    matches = _chunk_matches(a_bits, b_bits, chunks)            # (M, N, C)
    a_nnz = _chunk_nnz(a_bits, chunks)                         # (M, C)
    b_nnz = _chunk_nnz(b_bits.T, chunks)                       # (N, C)
    a_lines, b_lines = _lines(a_nnz, hw.line_bytes), _lines(b_nnz, hw.line_bytes)

    task_matches = matches.sum(axis=2)                         # (M, N)
    overhead_ann = _warmup(chunks, hw.warmup_per_chunk) + (chunks - 1) + 1
    overhead_snn = _warmup(chunks, hw.warmup_per_chunk) + 8 + (chunks - 1) + (cfg.L - 1) + cfg.L
    base = {"ann": task_matches + overhead_ann, "snn": task_matches + overhead_snn}

    busy = {core: np.zeros(hw.pes(core), dtype=np.int64) for core in ("snn", "ann")}
    stalls = {"bank": 0, "miss": 0}
    miss_lines = 0
    if memory and N and M:
        resident = _resident(a_lines, b_lines, M, N, hw)
        a_first = np.cumsum(a_lines.reshape(-1)) - a_lines.reshape(-1)
        b_first = int(a_lines.sum()) + np.cumsum(b_lines.reshape(-1)) - b_lines.reshape(-1)
        a_first, b_first = a_first.reshape(M, chunks).tolist(), b_first.reshape(N, chunks).tolist()
        a_cnt, b_cnt = a_lines.tolist(), b_lines.tolist()
        m_list = matches.tolist()
        res = resident.tolist()
        banks = hw.cache_banks
        miss_pen = hw.hbm_latency + hw.transfer_cycles(hw.line_bytes)
        occ: dict = {}
        for core, p in _pe_order(hw):
            queue = packs[core][p] if p < len(packs[core]) else []
            base_c = base[core]
            t = 0
            for n in queue:
                for m in range(M):
                    stall = 0
                    rel = 0
                    mm = m_list[m][n]
                    for j in range(chunks):
                        accesses = [(rel + k, a_first[m][j] + k) for k in range(a_cnt[m][j])]
                        la = a_cnt[m][j]
                        accesses += [(rel + la + k, b_first[n][j] + k) for k in range(b_cnt[n][j])]
                        for off, line in accesses:
                            c = t + off + stall
                            b = line % banks
                            while True:
                                key = c * banks + b
                                other = occ.get(key)
                                if other is None:
                                    occ[key] = line
                                    break
                                if other == line:
                                    break
                                stall += 1
                                stalls["bank"] += 1
                                c += 1
                            if not res[line]:
                                stall += miss_pen
                                stalls["miss"] += miss_pen
                                miss_lines += 1
                        rel += mm[j] + 1
                    d = int(base_c[m, n]) + stall
                    t += d
                    busy[core][p] += d
    else:
        for core in ("snn", "ann"):
            per_col = base[core].sum(axis=0)
            for p, pe in enumerate(packs[core]):
                if pe:
                    busy[core][p] = int(per_col[list(pe)].sum())

    compute = int(max((int(v.max()) if v.size else 0) for v in busy.values()))
    total = hw.launch_cycles + compute

    mask = sched.mask
    snn_tasks = int(mask.sum()) * M
    ann_tasks = (N - int(mask.sum())) * M
    col_matches = task_matches.sum(axis=0)
    a_beats, b_beats = _beats(a_nnz), _beats(b_nnz)
    events = {
        # every task reads all A-row and B-column chunk lines once
        "cache_access": int(N * a_lines.sum() + M * b_lines.sum()),
        "crossbar_beat": int(N * a_beats.sum() + M * b_beats.sum()),
        "hbm_byte": int(miss_lines * hw.line_bytes),
        "ann_fast_prefix": 2 * chunks * ann_tasks,
        "mac": int(col_matches[~mask].sum()),
        "qcfs": ann_tasks,
        "ann_busy": int(busy["ann"].sum()),
        "snn_fast_prefix": chunks * snn_tasks,
        "laggy_prefix": chunks * snn_tasks,
        "spike_gen": chunks * snn_tasks,
        "gated_acc": int(col_matches[mask].sum()) + cfg.T * snn_tasks,
        "soft_reset": cfg.L * snn_tasks,
        "snn_busy": int(busy["snn"].sum()),
    }
    output = hybrid_gemm_dense(job.A, job.B, mask, cfg) if compute_values else None
    return SimReport(total_cycles=total, pe_busy=busy, energy=energy_from_events(events, weights),
                     events=events, stalls=stalls, column_matches=col_matches, output=output,
                     compute_cycles=total, name=job.name)


def simulate_network(jobs, hw: HardwareConfig, weights: EnergyWeights, *, memory: bool = True,
                     compute_values: bool = False) -> SimReport:
    """Layers in order with weight prefetch of layer l+1 overlapping layer l.

    The first layer waits for its A and B operands from HBM; later layers
    read activations produced on chip and only need their weights, fetched
    while the previous layer computes.
    """
    jobs = list(jobs)
    if not jobs:
        raise ValueError("no layers")
    layers = [simulate_layer(j, hw, weights, memory=memory, compute_values=compute_values) for j in jobs]
    a0, b0 = jobs[0].operand_bytes()
    fill = hw.hbm_latency + hw.transfer_cycles(a0 + b0)
    hbm_bytes = a0 + b0
    starts = []
    end = fill
    for i, rep in enumerate(layers):
        start = end
        if i:
            _, b = jobs[i].operand_bytes()
            hbm_bytes += b
            # weights of layer i stream in while layer i-1 computes
            start = max(end, starts[i - 1] + hw.hbm_latency + hw.transfer_cycles(b))
        starts.append(start)
        end = start + rep.total_cycles
    total = int(end)
    events = {ev: 0 for ev in EVENTS}
    for rep in layers:
        for k, v in rep.events.items():
            events[k] += v
    events["hbm_byte"] += int(hbm_bytes)
    busy = {core: sum((rep.pe_busy[core] for rep in layers), np.zeros(hw.pes(core), dtype=np.int64))
            for core in ("snn", "ann")}
    stalls = {k: sum(rep.stalls.get(k, 0) for rep in layers) for k in ("bank", "miss")}
    return SimReport(total_cycles=total, pe_busy=busy, energy=energy_from_events(events, weights),
                     events=events, stalls=stalls, compute_cycles=sum(r.total_cycles for r in layers),
                     fill_cycles=fill, layers=layers)


# ---------------------------------------------------------------------------
# metrics


def utilization(report: SimReport) -> float:
    pes = report.total_pes
    if report.total_cycles <= 0 or pes == 0:
        return 0.0
    return report.busy_total() / (report.total_cycles * pes)


def speedup(report: SimReport, baseline: SimReport) -> float:
    return baseline.total_cycles / report.total_cycles


def energy_efficiency(report: SimReport, baseline: SimReport) -> float:
    return baseline.total_energy / report.total_energy


def power_breakdown(report: SimReport) -> dict:
    """Percent shares per component group; each group sums to 100."""
    out = {}
    for group, parts in GROUPS.items():
        vals = {k: math.fsum(report.energy[c] for c in comps) for k, comps in parts.items()}
        total = math.fsum(vals.values())
        if total <= 0:
            out[group] = {k: 0.0 for k in vals}
            continue
        keys = list(vals)
        shares = {k: 100.0 * vals[k] / total for k in keys[:-1]}
        shares[keys[-1]] = 100.0 - math.fsum(shares.values())
        out[group] = shares
    return out


# ---------------------------------------------------------------------------
# calibration


@dataclass
class CalibrationResult:
    params: CostParams
    points: dict
    residuals: dict

    def to_dict(self):
        return {"params": self.params.to_dict(), "points": self.points, "residuals": self.residuals}


def _microbench(M, K, r_row, a_density, w_density, L):
    """One-column layer with exactly ``r_row`` matches in every row."""
    ka = max(int(round(a_density * K)), 1)
    a_pos = np.unique(np.linspace(0, K - 1, ka).round().astype(int))
    A = np.zeros((M, K), dtype=np.int8)
    A[:, a_pos] = 1
    b = np.zeros(K, dtype=np.int8)
    if r_row:
        b[a_pos[np.unique(np.linspace(0, len(a_pos) - 1, r_row).round().astype(int))]] = 1
    extra = int(round(w_density * K)) - int(b.sum())
    free = np.flatnonzero((b == 0) & ~np.isin(np.arange(K), a_pos))
    if extra > 0 and free.size:
        b[free[np.unique(np.linspace(0, free.size - 1, min(extra, free.size)).round().astype(int))]] = 1
    return A, b[:, None]


def calibrate_cost_params(hw: HardwareConfig, weights: EnergyWeights, cfg: QuantConfig,
                          shape=(1, 1024), a_density: float = 1.0, w_density: float = 0.0,
                          lam: float = 1.0, counts=CALIBRATION_COUNTS) -> CalibrationResult:
    """Fit per-core (eps, zeta, beta, delta) from single-column microbenchmarks.

    Each point runs one column with ``r`` matches per row on a one-PE core
    with ideal memory; latency is the PE busy time and energy the layer
    energy. ``alpha`` is the latency of a layer with no columns.
    """
    M, K = shape
    ka = len(np.unique(np.linspace(0, K - 1, max(int(round(a_density * K)), 1)).round().astype(int)))
    rows = sorted({min(int(r), ka) for r in counts})
    if len(rows) < 2:
        raise CalibrationError(f"calibration needs two distinct match counts, got {rows}")
    one = hw.with_pes(1, 1)
    empty_sched = Schedule(np.zeros(0, dtype=bool), [[]], [[]], "calibration")
    empty = simulate_layer(LayerJob(np.zeros((M, K), np.int8), np.zeros((K, 0), np.int8), cfg, empty_sched),
                           one, weights, memory=False, compute_values=False)
    alpha = float(empty.total_cycles)
    cores, points, residuals = {}, {}, {}
    for core in ("snn", "ann"):
        xs, lat, en = [], [], []
        for r_row in rows:
            A, B = _microbench(M, K, r_row, a_density, w_density, cfg.L)
            to_snn = [core == "snn"]
            assign = pack_assignment(to_snn, [0.0], CostParams(CoreCost(0, 0, 0, 0, pes=1), CoreCost(0, 0, 0, 0, pes=1)))
            sched = Schedule(assign.to_snn, assign.snn_packing, assign.ann_packing, "calibration")
            rep = simulate_layer(LayerJob(A, B, cfg, sched), one, weights, memory=False, compute_values=False)
            xs.append(float(rep.column_matches[0]))
            lat.append(float(rep.pe_busy[core].max()))
            en.append(rep.total_energy)
        X = np.column_stack([xs, np.ones(len(xs))])
        if np.linalg.matrix_rank(X) < 2:
            raise CalibrationError("singular calibration fit (all match counts identical)")
        (beta, delta), *_ = np.linalg.lstsq(X, np.array(lat), rcond=None)
        (eps, zeta), *_ = np.linalg.lstsq(X, np.array(en), rcond=None)
        res_l = np.array(lat) - (beta * np.array(xs) + delta)
        res_e = np.array(en) - (eps * np.array(xs) + zeta)
        cores[core] = CoreCost(eps=max(float(eps), 0.0), zeta=max(float(zeta), 0.0),
                               beta=max(float(beta), 0.0), delta=max(float(delta), 0.0),
                               alpha=alpha, pes=hw.pes(core))
        points[core] = {"matches": xs, "latency": lat, "energy": en}
        residuals[core] = {"latency_max_abs": float(np.abs(res_l).max()),
                           "energy_max_abs": float(np.abs(res_e).max())}
    return CalibrationResult(CostParams(cores["snn"], cores["ann"], lam), points, residuals)


# ---------------------------------------------------------------------------
# serialization


def report_json(report: SimReport) -> str:
    return json.dumps(report.to_dict(), sort_keys=True, indent=1)
