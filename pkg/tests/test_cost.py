import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hybridsim.cost import (
    Assignment, ColumnStats, CoreCost, CostParams, core_makespan, edp, layer_delay,
    layer_energy, per_column_cost, quantile_stats, surrogate_phi,
)
from hybridsim.errors import StructuralError
from hybridsim.scheduler import enumerate_assignments, lpt_pack, pack_assignment

SNN = CoreCost(eps=1, zeta=1, beta=1.2, delta=10, alpha=0, pes=2)
ANN = CoreCost(eps=4, zeta=2, beta=1, delta=2, alpha=0, pes=2)
PARAMS = CostParams(SNN, ANN, 1.0)


def order_statistic(xs, q):
    xs = sorted(xs)
    k = 0
    while (k + 1) < q * len(xs) - 1e-12:
        k += 1
    return xs[k]


def test_quantile_examples():
    assert quantile_stats([[7, 7, 7]], 0.9).r_hat.tolist() == [7]
    assert quantile_stats([list(range(1, 11))], 0.9).r_hat.tolist() == [9]
    assert quantile_stats([[1, 2, 3, 4]], 0.5).r_hat.tolist() == [2]
    with pytest.raises(ValueError):
        quantile_stats([[]], 0.9)
    with pytest.raises(ValueError):
        quantile_stats([[1]], 1.0)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.integers(0, 500), min_size=1, max_size=40), st.floats(0.01, 0.99), st.floats(0.01, 0.99))
def test_quantile_oracle_and_monotone(xs, q1, q2):
    q1, q2 = sorted((q1, q2))
    a = quantile_stats([xs], q1).r_hat[0]
    b = quantile_stats([xs], q2).r_hat[0]
    assert a == order_statistic(xs, q1)
    assert a <= b


def test_per_column_cost():
    assert per_column_cost(0, SNN) == (1, 10)
    e, l = per_column_cost(10, SNN)
    assert e == pytest.approx(11) and l == pytest.approx(22)
    e2, l2 = per_column_cost(20, SNN)
    assert e2 - e == pytest.approx(SNN.eps * 10) and l2 - l == pytest.approx(SNN.beta * 10)


def test_layer_energy():
    r = np.array([10.0, 20.0])
    all_ann = Assignment([False, False])
    assert layer_energy(all_ann, r, PARAMS) == pytest.approx(42 + 82)
    split = Assignment([True, False])
    assert layer_energy(split, r, PARAMS) == pytest.approx(11 + 82)
    total = layer_energy(Assignment([True, True]), r, PARAMS) + layer_energy(all_ann, r, PARAMS)
    assert total == pytest.approx(sum(SNN.energy(r) + ANN.energy(r)))
    with pytest.raises(StructuralError):
        layer_energy(Assignment([True]), r, PARAMS)


def test_core_makespan():
    p = CostParams(CoreCost(0, 0, 1, 0, alpha=3, pes=2), CoreCost(0, 0, 1, 0, alpha=1, pes=1))
    r = np.array([5.0, 3.0, 5.0])
    a = Assignment([True, True, False], snn_packing=[[0], [1]], ann_packing=[[2]])
    assert core_makespan(a, r, "snn", p) == 3 + 5
    empty = Assignment([False] * 3, snn_packing=[[], []], ann_packing=[[0, 1, 2]])
    assert core_makespan(empty, r, "snn", p) == 3
    assert core_makespan(empty, r, "ann", p) == 1 + 13
    # loads {8, 5}
    p2 = p.with_pes(2, 1)
    b = Assignment([True, True, True], snn_packing=[[0, 1], [2]], ann_packing=[[]])
    assert core_makespan(b, r, "snn", p2) == 3 + 8
    bad = Assignment([True, True, False], snn_packing=[[0], [7]], ann_packing=[[2]])
    with pytest.raises(StructuralError):
        core_makespan(bad, r, "snn", p)


def test_delay_edp_phi():
    p = CostParams(CoreCost(0, 0, 1, 0, pes=1), CoreCost(0, 0, 1, 0, pes=1), lam=2.0)
    r = np.array([10.0, 7.0])
    a = Assignment([True, False], [[0]], [[1]])
    assert layer_delay(a, r, p) == 10
    zero = CostParams(CoreCost(0, 0, 0, 0), CoreCost(0, 0, 0, 0))
    assert edp(pack_assignment([True, False], r, zero), r, zero) == 0
    p3 = CostParams(CoreCost(10, 0, 1, 0, pes=1), CoreCost(10, 0, 1, 0, pes=1), lam=2.0)
    r3 = np.array([10.0])
    a3 = pack_assignment([False], r3, p3)
    assert layer_energy(a3, r3, p3) == 100 and layer_delay(a3, r3, p3) == 10
    assert edp(a3, r3, p3) == 1000
    assert surrogate_phi(a3, r3, p3) == 120


def test_delay_composition_random():
    rng = np.random.default_rng(3)
    r = rng.integers(0, 200, 40).astype(float)
    a = pack_assignment(rng.random(40) < 0.5, r, PARAMS)
    assert layer_delay(a, r, PARAMS) == max(core_makespan(a, r, "snn", PARAMS),
                                            core_makespan(a, r, "ann", PARAMS))


def test_small_lambda_orders_by_energy():
    r = np.array([12, 16, 44, 52, 57, 71, 114, 125, 140, 216], dtype=float)
    p = PARAMS.with_lambda(1e-9)
    masks, energy, delay = enumerate_assignments(r, p)
    phi = energy + p.lam * delay
    order_e = np.argsort(energy, kind="stable")
    assert np.all(np.diff(phi[order_e]) >= -1e-6)


def knee_lambda(r, p):
    # slope E*/D* at the EDP minimum
    masks, energy, delay = enumerate_assignments(r, p)
    k = int(np.argmin(energy * delay))
    return energy[k] / delay[k], float((energy * delay)[k]), masks, energy, delay


def test_phi_minimizer_near_edp_minimum_diagnostic_list():
    r = np.array([12, 16, 44, 52, 57, 71, 114, 125, 140, 216], dtype=float)
    lam, best, masks, energy, delay = knee_lambda(r, PARAMS)
    phi = energy + lam * delay
    k = int(np.argmin(phi))
    assert energy[k] * delay[k] <= 1.01 * best


def test_phi_edp_consistency_random_instances():
    rng = np.random.default_rng(17)
    for _ in range(30):
        n = int(rng.integers(2, 11))
        r = rng.integers(0, 300, n).astype(float)
        snn = CoreCost(rng.uniform(0.2, 2), rng.uniform(0, 3), rng.uniform(0.8, 1.6), rng.uniform(0, 40),
                       rng.uniform(0, 20), int(rng.integers(1, 4)))
        ann = CoreCost(rng.uniform(1, 5), rng.uniform(0, 3), 1.0, rng.uniform(0, 20),
                       rng.uniform(0, 20), int(rng.integers(1, 4)))
        p = CostParams(snn, ann)
        lam, best, masks, energy, delay = knee_lambda(r, p)
        phi = energy + lam * delay
        k = int(np.argmin(phi))
        assert energy[k] * delay[k] <= 1.05 * best


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 1000), min_size=1, max_size=30), st.integers(1, 6), st.floats(0.1, 10))
def test_affine_scaling_and_makespan_bounds(rs, pes, c):
    r = np.array(rs, dtype=float)
    core = CoreCost(eps=1.5, zeta=0.0, beta=1.1, delta=0.0, alpha=4.0, pes=pes)
    p = CostParams(core, core)
    a = pack_assignment(np.ones(r.size, dtype=bool), r, p)
    ac = pack_assignment(np.ones(r.size, dtype=bool), r * c, p)
    e, ec = layer_energy(a, r, p), layer_energy(ac, r * c, p)
    assert ec == pytest.approx(c * e, rel=1e-9, abs=1e-9)
    t = core_makespan(a, r, "snn", p)
    lengths = core.latency(r)
    assert t >= core.alpha + lengths.sum() / pes - 1e-9
    assert t >= core.alpha + lengths.max() - 1e-9
    # same packing with scaled lengths scales the load term exactly
    scaled = Assignment(a.to_snn, a.snn_packing, a.ann_packing)
    assert core_makespan(scaled, r * c, "snn", p) - core.alpha == pytest.approx(c * (t - core.alpha), rel=1e-9, abs=1e-9)


def test_params_json_roundtrip():
    d = PARAMS.to_dict()
    assert set(d) == {"snn", "ann", "lambda"}
    assert set(d["snn"]) == {"eps", "zeta", "beta", "delta", "alpha", "pes"}
    assert CostParams.from_dict(d) == PARAMS
    assert CostParams.from_dict(d).digest() == PARAMS.digest()
    st_ = ColumnStats.from_rhat([1, 2, 3])
    back = ColumnStats.from_dict(st_.to_dict())
    assert back.digest() == st_.digest()
    with pytest.raises(ValueError):
        CostParams(SNN, ANN, 0.0)
    with pytest.raises(ValueError):
        CoreCost(-1, 0, 0, 0)


def test_lpt_used_by_packing():
    assert lpt_pack([0], [3.0], 1) == [[0]]
