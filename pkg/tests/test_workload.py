import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hybridsim.cyclesim import EnergyWeights, HardwareConfig, LayerJob, simulate_layer
from hybridsim.errors import DimensionError, ParameterError
from hybridsim.exact import QuantConfig
from hybridsim.scheduler import Schedule
from hybridsim.sparse import match_count
from hybridsim.workload import (
    LayerDescriptor, SUITES, column_densities, descriptors_from_json, descriptors_to_json,
    gen_workload, im2col_dims, match_counts, profile, reference_suite,
)


def conv(**kw):
    base = dict(name="c", kind="conv", cin=3, height=32, width=32, cout=64, kernel=3, stride=1, pad=1)
    base.update(kw)
    return LayerDescriptor(**base)


def test_im2col_examples():
    assert im2col_dims(conv()) == (1024, 27, 64)
    assert im2col_dims(conv(cin=16, kernel=1, pad=0)) == (1024, 16, 64)
    assert im2col_dims(conv(kernel=2, stride=2, pad=0))[0] == 16 * 16
    assert im2col_dims(LayerDescriptor("g", M=4, K=5, N=6)) == (4, 5, 6)


def test_im2col_rejects_empty_output():
    with pytest.raises(DimensionError):
        im2col_dims(conv(height=2, width=2, kernel=5, pad=0))
    with pytest.raises(DimensionError):
        LayerDescriptor("g", M=0, K=4, N=4)


@pytest.mark.parametrize("field", ["act_density", "weight_density"])
@pytest.mark.parametrize("value", [0.0, -0.1, 1.5])
def test_infeasible_density(field, value):
    with pytest.raises(ParameterError):
        LayerDescriptor("g", M=4, K=4, N=4, **{field: value})


def test_full_density_is_dense():
    wl = gen_workload(LayerDescriptor("g", M=8, K=64, N=16, act_density=1.0, weight_density=1.0), 0)
    assert np.all(wl.test_input != 0)
    assert np.all(wl.samples != 0)
    assert np.all(wl.weights != 0)


def test_realized_density():
    wl = gen_workload(LayerDescriptor("g", M=1024, K=256, N=64, act_density=0.25, weight_density=0.25), 3)
    assert 0.23 <= np.mean(wl.test_input != 0) <= 0.27
    for s in wl.samples:
        assert 0.23 <= np.mean(s != 0) <= 0.27
    assert abs(np.mean(wl.weights != 0) - 0.25) <= 0.02


def test_value_ranges():
    wl = gen_workload(LayerDescriptor("g", M=64, K=64, N=64), 1, L=4)
    a = wl.test_input[wl.test_input != 0]
    assert a.min() >= 1 and a.max() <= 4
    b = wl.weights[wl.weights != 0]
    assert np.abs(b).min() >= 1 and np.abs(b).max() <= 127
    assert (b < 0).any() and (b > 0).any()


def test_determinism():
    d = LayerDescriptor("g", M=16, K=64, N=32, zipf=1.0)
    a, b = gen_workload(d, 11), gen_workload(d, 11)
    assert np.array_equal(a.weights, b.weights)
    assert np.array_equal(a.samples, b.samples)
    assert np.array_equal(a.test_input, b.test_input)
    c = gen_workload(d, 12)
    assert not np.array_equal(a.weights, c.weights)


def test_sample_substreams_are_independent_of_count():
    # adding samples leaves the weights and test input untouched
    d = LayerDescriptor("g", M=8, K=32, N=8)
    a, b = gen_workload(d, 5, n_samples=2), gen_workload(d, 5, n_samples=6)
    assert np.array_equal(a.weights, b.weights)
    assert np.array_equal(a.test_input, b.test_input)


def test_profile_examples():
    M, K, N = 3, 20, 4
    dense = np.ones((2, M, K), np.int8)
    st_ = profile(dense, np.ones((K, N), np.int8), q=0.9)
    assert np.all(st_.r_hat == M * K)
    A = np.zeros((1, M, K), np.int8)
    A[:, :, :10] = 1
    B = np.zeros((K, N), np.int8)
    B[10:] = 1
    assert np.all(profile(A, B).r_hat == 0)
    with pytest.raises(DimensionError):
        profile(A, np.ones((K + 1, N), np.int8))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_match_counts_recount(seed):
    rng = np.random.default_rng(seed)
    M, K, N = rng.integers(1, 6), rng.integers(1, 200), rng.integers(1, 6)
    A = (rng.random((M, K)) < 0.4).astype(np.int8)
    B = (rng.random((K, N)) < 0.4).astype(np.int8)
    got = match_counts(A, B)
    for n in range(N):
        assert got[n] == sum(match_count(A[m] != 0, B[:, n] != 0) for m in range(M))


def test_profile_equals_simulation():
    wl = gen_workload(LayerDescriptor("g", M=6, K=300, N=12), 4)
    st_ = profile(wl.test_input, wl.weights, q=0.5)
    N = wl.weights.shape[1]
    sched = Schedule(np.zeros(N, bool), [[]], [list(range(N))], "t")
    rep = simulate_layer(LayerJob(wl.test_input, wl.weights, QuantConfig(), sched),
                         HardwareConfig().with_pes(1, 1), EnergyWeights(), memory=False, compute_values=False)
    assert np.array_equal(rep.column_matches, st_.r_hat.astype(np.int64))


def _cv(x):
    return float(np.std(x) / np.mean(x))


def test_heterogeneity_raises_cv():
    cvs = []
    for z in (0.0, 0.4, 0.8, 1.2, 1.6):
        wl = gen_workload(LayerDescriptor("g", M=16, K=256, N=512, act_density=0.4, weight_density=0.3,
                                          zipf=z), 0, n_samples=4)
        cvs.append(_cv(profile(wl.samples, wl.weights).r_hat))
    assert all(a < b for a, b in zip(cvs, cvs[1:]))


@given(st.integers(1, 600), st.floats(0.01, 1.0), st.floats(0.0, 2.0))
def test_column_densities_mean(n, target, zipf):
    d = column_densities(n, target, zipf, np.random.default_rng(0))
    assert d.shape == (n,)
    assert np.all((d > 0) & (d <= 1))
    assert d.mean() == pytest.approx(target, rel=1e-6, abs=1e-9)


def test_reference_suites():
    for name in SUITES:
        models = reference_suite(name)
        assert set(models) == {"vgg", "resnet", "googlenet", "bert"}
        for descs in models.values():
            for d in descs:
                M, K, N = d.dims
                assert min(M, K, N) > 0
    with pytest.raises(ParameterError):
        reference_suite("nope")


def test_descriptor_json_roundtrip():
    models = reference_suite("balanced")
    assert descriptors_from_json(descriptors_to_json(models)) == models
    single = descriptors_from_json('[{"name": "x", "M": 2, "K": 3, "N": 4}]')
    assert single["model"][0].dims == (2, 3, 4)
