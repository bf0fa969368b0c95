"""Offline column-to-core assignment.

The cost schedule scores every column on both cores, sends it to the cheaper
one, LPT-packs each core and then runs a few passes of single-flip local
search on ``Phi = E + lambda * D``. Baselines (random, layer-wise, single
mode) and an exhaustive EDP oracle share the same LPT packing, so every
strategy is compared on equal footing.
"""

from __future__ import annotations

import base64
import heapq
import json
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cost import Assignment, ColumnStats, CostParams, _r_hat, edp
from .errors import CapacityError, StructuralError

LAMBDA_GRID = (0.25, 0.5, 1.0, 2.0, 4.0)
FULL_REPACK_LIMIT = 1024
ORACLE_LIMIT = 20
SCHEDULE_FORMAT = "hybridsim-schedule"


# ---------------------------------------------------------------------------
# packing


def lpt_pack(columns, lengths, P: int) -> list[list[int]]:
    """Longest-processing-time-first packing of ``columns`` onto ``P`` PEs.

    ``lengths[j]`` is the processing time of ``columns[j]``. Columns go in
    descending length (lower index first on ties) to the least-loaded PE
    (lower PE id first on ties).
    """
    columns = [int(c) for c in columns]
    lengths = np.asarray(lengths, dtype=float).reshape(-1)
    if len(columns) != lengths.shape[0]:
        raise ValueError("columns and lengths differ in size")
    if not columns:
        return [[] for _ in range(max(P, 0))]
    if P < 1:
        raise CapacityError(f"{len(columns)} columns but no PEs")
    order = np.lexsort((np.asarray(columns), -lengths))
    packing: list[list[int]] = [[] for _ in range(P)]
    heap = [(0.0, p) for p in range(P)]
    for j in order:
        load, p = heapq.heappop(heap)
        packing[p].append(columns[j])
        heapq.heappush(heap, (load + lengths[j], p))
    return packing


def _lpt_makespan(desc_lengths: Sequence[float], P: int) -> float:
    """Makespan of LPT for lengths already sorted in LPT order."""
    if len(desc_lengths) == 0:
        return 0.0
    if P >= len(desc_lengths):
        return float(desc_lengths[0])
    # which of several equally loaded PEs takes a column does not change the loads
    loads = [0.0] * P
    for x in desc_lengths:
        heapq.heapreplace(loads, loads[0] + x)
    return max(loads)


def _force_capacity(to_snn: np.ndarray, params: CostParams) -> np.ndarray:
    if params.snn.pes == 0 and params.ann.pes == 0:
        raise CapacityError("both cores have zero PEs")
    if params.snn.pes == 0 and to_snn.any():
        warnings.warn("SNN core has no PEs; forcing all columns to ANN", stacklevel=3)
        return np.zeros_like(to_snn)
    if params.ann.pes == 0 and not to_snn.all():
        warnings.warn("ANN core has no PEs; forcing all columns to SNN", stacklevel=3)
        return np.ones_like(to_snn)
    return to_snn


def pack_assignment(to_snn, stats, params: CostParams) -> Assignment:
    r = _r_hat(stats)
    mask = np.asarray(to_snn, dtype=bool).reshape(-1)
    if mask.shape[0] != r.shape[0]:
        raise StructuralError("mask length differs from column count")
    packs = {}
    for core, cols in (("snn", np.flatnonzero(mask)), ("ann", np.flatnonzero(~mask))):
        cc = params.core(core)
        packs[core] = lpt_pack(cols, cc.latency(r[cols]), cc.pes)
    return Assignment(mask, packs["snn"], packs["ann"])


# ---------------------------------------------------------------------------
# schedules


@dataclass
class RefineReport:
    passes: int = 0
    flips: list = field(default_factory=list)
    phi: list = field(default_factory=list)
    moved: list = field(default_factory=list)

    def to_dict(self):
        return {"passes": self.passes, "flips": list(self.flips),
                "phi": [float(x) for x in self.phi], "moved": list(self.moved)}


@dataclass(eq=False)
class Schedule:
    mask: np.ndarray
    snn_packing: list
    ann_packing: list
    strategy: str
    provenance: dict = field(default_factory=dict)
    refine: RefineReport | None = None

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool).reshape(-1)

    @property
    def n(self) -> int:
        return int(self.mask.shape[0])

    def assignment(self) -> Assignment:
        return Assignment(self.mask, self.snn_packing, self.ann_packing)

    def pe_queues(self):
        """(core, pe, columns) for every PE, in packing order."""
        out = []
        for core, pack in (("snn", self.snn_packing), ("ann", self.ann_packing)):
            for p, cols in enumerate(pack):
                out.append((core, p, list(cols)))
        return out

    def __eq__(self, other):
        if not isinstance(other, Schedule):
            return NotImplemented
        return (np.array_equal(self.mask, other.mask)
                and _norm(self.snn_packing) == _norm(other.snn_packing)
                and _norm(self.ann_packing) == _norm(other.ann_packing)
                and self.strategy == other.strategy and self.provenance == other.provenance)


def _norm(pack):
    return [[int(c) for c in pe] for pe in pack]


def _provenance(stats, params: CostParams, seed=None) -> dict:
    r = _r_hat(stats)
    st = stats if isinstance(stats, ColumnStats) else ColumnStats.from_rhat(r)
    return {"params_hash": params.digest(), "stats_hash": st.digest(), "seed": seed}


def _schedule_from(assign: Assignment, strategy, stats, params, seed=None, refine=None) -> Schedule:
    return Schedule(assign.to_snn.copy(), _norm(assign.snn_packing), _norm(assign.ann_packing),
                    strategy, _provenance(stats, params, seed), refine)


# ---------------------------------------------------------------------------
# cost schedule


def marginal_scores(stats, params: CostParams):
    """(S_snn, S_ann) = e + lambda * l per column."""
    r = _r_hat(stats)
    lam = params.lam
    s_snn = (params.snn.eps + lam * params.snn.beta) * r + (params.snn.zeta + lam * params.snn.delta)
    s_ann = (params.ann.eps + lam * params.ann.beta) * r + (params.ann.zeta + lam * params.ann.delta)
    return s_snn, s_ann


def stage1_split(stats, params: CostParams) -> Assignment:
    s_snn, s_ann = marginal_scores(stats, params)
    to_snn = _force_capacity(s_snn < s_ann, params)
    return Assignment(to_snn)


class _FullState:
    """Flip evaluation that re-runs LPT on both cores for every candidate."""

    def __init__(self, assign, stats, params):
        r = _r_hat(stats)
        self.params, self.stats = params, stats
        self.n = r.shape[0]
        self.e = {"snn": params.snn.energy(r), "ann": params.ann.energy(r)}
        self.l = {"snn": params.snn.latency(r), "ann": params.ann.latency(r)}
        idx = np.arange(self.n)
        self.order = {c: np.lexsort((idx, -self.l[c])) for c in ("snn", "ann")}
        self.sorted_l = {c: self.l[c][self.order[c]].tolist() for c in ("snn", "ann")}
        self.mask = assign.to_snn.copy()
        self.energy = float(np.where(self.mask, self.e["snn"], self.e["ann"]).sum())
        self.phi = self._phi(self.mask, self.energy)

    def _makespan(self, core, keep):
        lengths = self.sorted_l[core]
        desc = [lengths[k] for k in np.flatnonzero(keep[self.order[core]]).tolist()]
        return self.params.core(core).alpha + _lpt_makespan(desc, self.params.core(core).pes)

    def _phi(self, mask, energy):
        t = max(self._makespan("snn", mask), self._makespan("ann", ~mask))
        return energy + self.params.lam * t

    def _flip_energy(self, i):
        src, dst = ("snn", "ann") if self.mask[i] else ("ann", "snn")
        return self.energy - self.e[src][i] + self.e[dst][i]

    def delta(self, i):
        target_snn = not self.mask[i]
        if self.params.core("snn" if target_snn else "ann").pes == 0:
            return np.inf
        new = self.mask.copy()
        new[i] = target_snn
        return self._phi(new, self._flip_energy(i)) - self.phi

    def deltas(self):
        return np.array([self.delta(i) for i in range(self.n)])

    def commit(self, i):
        self.mask[i] = not self.mask[i]
        self.energy = float(np.where(self.mask, self.e["snn"], self.e["ann"]).sum())
        self.phi = self._phi(self.mask, self.energy)

    def assignment(self):
        return pack_assignment(self.mask, self.stats, self.params)


class _IncrementalState:
    """Flip evaluation that moves a column between two PEs and leaves the rest in place.

    The flipped column leaves its PE and joins the least-loaded PE of the other
    core, so a candidate costs O(1) given the top-two loads of each core.
    """

    def __init__(self, assign, stats, params):
        r = _r_hat(stats)
        self.params = params
        self.n = r.shape[0]
        self.lat = {"snn": params.snn.latency(r), "ann": params.ann.latency(r)}
        self.en = {"snn": params.snn.energy(r), "ann": params.ann.energy(r)}
        self.alpha = {"snn": params.snn.alpha, "ann": params.ann.alpha}
        self.packs = {"snn": [list(pe) for pe in assign.snn_packing],
                      "ann": [list(pe) for pe in assign.ann_packing]}
        self.mask = assign.to_snn.copy()
        self.pe_of = np.zeros(self.n, dtype=np.int64)
        self.loads = {}
        for core in ("snn", "ann"):
            lat = self.lat[core]
            self.loads[core] = np.array([float(lat[pe].sum()) if pe else 0.0 for pe in self.packs[core]])
            for p, pe in enumerate(self.packs[core]):
                self.pe_of[pe] = p
        self.energy = float(np.where(self.mask, self.en["snn"], self.en["ann"]).sum())
        self.phi = self._phi()

    def _makespan(self, core):
        ld = self.loads[core]
        return self.alpha[core] + (ld.max() if ld.size else 0.0)

    def _phi(self):
        return self.energy + self.params.lam * max(self._makespan("snn"), self._makespan("ann"))

    def _deltas_for(self, cols):
        out = np.full(cols.shape[0], np.inf)
        on_snn = self.mask[cols]
        for src, dst, sel in (("snn", "ann", on_snn), ("ann", "snn", ~on_snn)):
            c = cols[sel]
            ls, ld = self.loads[src], self.loads[dst]
            if c.size == 0 or ld.size == 0:
                continue
            top = np.argsort(-ls, kind="stable")
            first = ls[top[0]]
            second = ls[top[1]] if ls.size > 1 else 0.0
            p = self.pe_of[c]
            others = np.where(p == top[0], second, first)
            t_src = self.alpha[src] + np.maximum(others, ls[p] - self.lat[src][c])
            t_dst = self.alpha[dst] + np.maximum(ld.max(), ld.min() + self.lat[dst][c])
            out[sel] = (self.energy - self.en[src][c] + self.en[dst][c]
                        + self.params.lam * np.maximum(t_src, t_dst)) - self.phi
        return out

    def deltas(self):
        return self._deltas_for(np.arange(self.n))

    def delta(self, i):
        return float(self._deltas_for(np.array([i]))[0])

    def commit(self, i):
        src = "snn" if self.mask[i] else "ann"
        dst = "ann" if src == "snn" else "snn"
        p = int(self.pe_of[i])
        self.packs[src][p].remove(i)
        self.loads[src][p] -= self.lat[src][i]
        q = int(np.argmin(self.loads[dst]))
        self.packs[dst][q].append(i)
        self.loads[dst][q] += self.lat[dst][i]
        self.pe_of[i] = q
        self.mask[i] = not self.mask[i]
        self.energy += self.en[dst][i] - self.en[src][i]
        self.phi = self._phi()

    def assignment(self):
        return Assignment(self.mask.copy(), self.packs["snn"], self.packs["ann"])


def _improves(delta, phi):
    return delta < -1e-12 * max(1.0, abs(phi))


def stage2_refine(assign: Assignment, stats, params: CostParams, max_passes: int = 3,
                  repack: str = "full", moves: str = "ranked") -> tuple[Assignment, RefineReport]:
    """Single-flip local search on Phi; Phi never increases.

    Each pass evaluates the flip of every column against the pass-start state.
    ``moves="single"`` commits only the best strictly improving flip;
    ``moves="ranked"`` commits it and then walks the remaining improving
    candidates best-first, re-checking each against the current state.
    ``repack="full"`` re-runs LPT on both cores for every candidate,
    ``"incremental"`` only moves the flipped column between two PEs, and
    ``"auto"`` picks full up to 1024 columns.
    """
    if not assign.packed:
        assign = pack_assignment(assign.to_snn, stats, params)
    if repack == "auto":
        repack = "full" if assign.n <= FULL_REPACK_LIMIT else "incremental"
    if repack == "full":
        state = _FullState(assign, stats, params)
    elif repack == "incremental":
        state = _IncrementalState(assign, stats, params)
    else:
        raise ValueError(f"unknown repack mode {repack!r}")
    if moves not in ("single", "ranked"):
        raise ValueError(f"unknown move rule {moves!r}")
    report = RefineReport(phi=[state.phi])
    for _ in range(max_passes):
        report.passes += 1
        deltas = state.deltas()
        # most negative first, lower column index on ties
        order = np.lexsort((np.arange(state.n), deltas))
        committed = 0
        start_phi = state.phi
        for i in order:
            i = int(i)
            # sorted, so once a pass-start delta stops improving, all later ones do too
            if not _improves(deltas[i], start_phi):
                break
            if committed and not _improves(state.delta(i), state.phi):
                continue
            state.commit(i)
            committed += 1
            report.moved.append(i)
            if moves == "single":
                break
        if committed and isinstance(state, _IncrementalState):
            # moves only touch two PEs; a fresh LPT pass rebalances what they left behind
            repacked = _IncrementalState(pack_assignment(state.mask, stats, params), stats, params)
            if repacked.phi <= state.phi:
                state = repacked
        report.flips.append(committed)
        if committed:
            report.phi.append(state.phi)
        else:
            break
    return state.assignment(), report


def schedule_cost(stats, params: CostParams, max_passes: int = 3, repack: str = "auto",
                  moves: str = "ranked") -> Schedule:
    split = stage1_split(stats, params)
    packed = pack_assignment(split.to_snn, stats, params)
    refined, report = stage2_refine(packed, stats, params, max_passes, repack, moves)
    return _schedule_from(refined, "cost", stats, params, refine=report)


def lambda_scale(stats, params: CostParams) -> float:
    """Rough energy/delay slope: mean-core energy over a balanced-delay estimate.

    The delay estimate is the larger of the longest single column and the total
    work spread over every PE, so it stays meaningful when PEs outnumber columns.
    """
    r = _r_hat(stats)
    e = 0.5 * (params.snn.energy(r) + params.ann.energy(r))
    l = 0.5 * (params.snn.latency(r) + params.ann.latency(r))
    pes = max(params.snn.pes + params.ann.pes, 1)
    d = max(float(l.max(initial=0.0)), float(l.sum()) / pes)
    d += 0.5 * (params.snn.alpha + params.ann.alpha)
    if d <= 0:
        return 1.0
    return float(max(e.sum(), 1e-12) / d)


def tune_lambda(stats, params: CostParams, grid: Sequence[float] = LAMBDA_GRID,
                max_passes: int = 3):
    """Pick lambda from ``grid * lambda_scale`` by the EDP of the resulting schedule.

    Returns ``(params_with_lambda, multiplier, table)``; ties go to the smaller lambda.
    """
    scale = lambda_scale(stats, params)
    table = []
    best = None
    for mult in grid:
        p = params.with_lambda(mult * scale)
        s = schedule_cost(stats, p, max_passes)
        value = edp(s.assignment(), stats, p)
        table.append((mult, mult * scale, value))
        if best is None or value < best[2]:
            best = (mult, p, value)
    return best[1], best[0], table


def schedule_random(stats, seed: int, params: CostParams) -> Schedule:
    """Fair coin per column from PCG64 seeded with ``seed``, then LPT."""
    rng = np.random.Generator(np.random.PCG64(seed))
    n = _r_hat(stats).shape[0]
    to_snn = _force_capacity(rng.random(n) < 0.5, params)
    return _schedule_from(pack_assignment(to_snn, stats, params), "random", stats, params, seed)


def schedule_single(stats, params: CostParams, mode: str) -> Schedule:
    n = _r_hat(stats).shape[0]
    to_snn = np.full(n, mode == "snn")
    return _schedule_from(pack_assignment(to_snn, stats, params), f"{mode}-only", stats, params)


def schedule_layerwise(stats_list, params_list, k_snn: int) -> list[Schedule]:
    """First ``k_snn`` layers entirely on SNN, the rest entirely on ANN."""
    if isinstance(params_list, CostParams):
        params_list = [params_list] * len(stats_list)
    out = []
    for idx, (stats, params) in enumerate(zip(stats_list, params_list)):
        n = _r_hat(stats).shape[0]
        to_snn = np.full(n, idx < k_snn)
        s = _schedule_from(pack_assignment(to_snn, stats, params), f"layerwise-{k_snn}", stats, params)
        out.append(s)
    return out


# ---------------------------------------------------------------------------
# oracle


def enumerate_assignments(stats, params: CostParams, limit: int = ORACLE_LIMIT):
    """(masks, E, D) for all 2^n assignments in lexicographic mask order, LPT-packed."""
    r = _r_hat(stats)
    n = r.shape[0]
    if n > limit:
        raise CapacityError(f"{n} columns exceed enumeration limit {limit}")
    e_s, e_a = params.snn.energy(r), params.ann.energy(r)
    l_s, l_a = params.snn.latency(r), params.ann.latency(r)
    order_s = np.lexsort((np.arange(n), -l_s)).tolist()
    order_a = np.lexsort((np.arange(n), -l_a)).tolist()
    count = 1 << n
    xs = np.arange(count, dtype=np.int64)
    masks = ((xs[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1).astype(bool)
    energy = np.where(masks, e_s[None, :], e_a[None, :]).sum(axis=1)
    delay = np.full(count, np.inf)
    for x in range(count):
        row = masks[x]
        if (row.any() and params.snn.pes == 0) or ((~row).any() and params.ann.pes == 0):
            continue
        t_s = params.snn.alpha + _lpt_makespan([l_s[j] for j in order_s if row[j]], params.snn.pes)
        t_a = params.ann.alpha + _lpt_makespan([l_a[j] for j in order_a if not row[j]], params.ann.pes)
        delay[x] = max(t_s, t_a)
    return masks, energy, delay


def brute_force_min_edp(stats, params: CostParams, limit: int = ORACLE_LIMIT):
    """Exhaustive EDP minimum; ties go to the lexicographically smallest mask."""
    masks, energy, delay = enumerate_assignments(stats, params, limit)
    values = energy * delay
    best = int(np.argmin(values))  # first minimum in lexicographic order
    return pack_assignment(masks[best], stats, params), float(values[best])


def brute_force_min_phi(stats, params: CostParams, limit: int = ORACLE_LIMIT):
    masks, energy, delay = enumerate_assignments(stats, params, limit)
    values = energy + params.lam * delay
    best = int(np.argmin(values))
    return pack_assignment(masks[best], stats, params), float(values[best])


# ---------------------------------------------------------------------------
# bitmask files


def encode_mask(mask) -> str:
    bits = np.asarray(mask, dtype=bool)
    return base64.b64encode(np.packbits(bits, bitorder="little").tobytes()).decode("ascii")


def decode_mask(text: str, n: int) -> np.ndarray:
    raw = np.frombuffer(base64.b64decode(text), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")[:n].astype(bool)


def schedules_to_dict(schedules, names=None) -> dict:
    if isinstance(schedules, Schedule):
        schedules = [schedules]
    if isinstance(schedules, dict):
        names, schedules = list(schedules), list(schedules.values())
    names = names or [f"layer{i}" for i in range(len(schedules))]
    layers = []
    for name, s in zip(names, schedules):
        entry = {"name": name, "n": s.n, "mask": encode_mask(s.mask),
                 "snn_packing": _norm(s.snn_packing), "ann_packing": _norm(s.ann_packing),
                 "strategy": s.strategy, "provenance": dict(s.provenance)}
        if s.refine is not None:
            entry["refine"] = s.refine.to_dict()
        layers.append(entry)
    return {"format": SCHEDULE_FORMAT, "version": 1, "layers": layers}


def schedules_from_dict(d, stats=None, params=None) -> dict[str, Schedule]:
    if d.get("format") != SCHEDULE_FORMAT:
        raise StructuralError("not a schedule file")
    out = {}
    stats_list = stats if isinstance(stats, (list, tuple)) else [stats] * len(d["layers"])
    params_list = params if isinstance(params, (list, tuple)) else [params] * len(d["layers"])
    for entry, st, pa in zip(d["layers"], stats_list, params_list):
        refine = None
        if "refine" in entry:
            refine = RefineReport(**entry["refine"])
        s = Schedule(decode_mask(entry["mask"], entry["n"]), entry["snn_packing"], entry["ann_packing"],
                     entry["strategy"], dict(entry["provenance"]), refine)
        if st is not None:
            st_obj = st if isinstance(st, ColumnStats) else ColumnStats.from_rhat(st)
            if st_obj.digest() != s.provenance.get("stats_hash"):
                warnings.warn(f"schedule {entry['name']}: stats hash mismatch (stale schedule?)", stacklevel=2)
        if pa is not None and pa.digest() != s.provenance.get("params_hash"):
            warnings.warn(f"schedule {entry['name']}: params hash mismatch (stale schedule?)", stacklevel=2)
        s.assignment().validate()
        out[entry["name"]] = s
    return out


def emit_bitmask(schedules, path, names=None):
    with open(path, "w") as fh:
        json.dump(schedules_to_dict(schedules, names), fh, sort_keys=True, indent=1)


def load_bitmask(path, stats=None, params=None) -> dict[str, Schedule]:
    with open(path) as fh:
        return schedules_from_dict(json.load(fh), stats, params)
