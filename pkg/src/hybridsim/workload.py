"""Synthetic dual-sparse workloads, im2col shapes and offline profiling."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .cost import ColumnStats, quantile_stats
from .errors import DimensionError, ParameterError

WEIGHT_MAX = 127


@dataclass(frozen=True)
class LayerDescriptor:
    name: str
    kind: str = "gemm"              # "gemm" or "conv"
    M: int = 0
    K: int = 0
    N: int = 0
    cin: int = 0
    height: int = 0
    width: int = 0
    cout: int = 0
    kernel: int = 1
    stride: int = 1
    pad: int = 0
    act_density: float = 0.5
    weight_density: float = 0.5
    zipf: float = 0.0               # heterogeneity of per-column weight densities

    def __post_init__(self):
        if self.kind not in ("gemm", "conv"):
            raise ParameterError(f"unknown layer kind {self.kind!r}")
        for name in ("act_density", "weight_density"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ParameterError(f"{name}={v} outside (0, 1]")
        if self.zipf < 0:
            raise ParameterError("zipf exponent must be non-negative")
        if self.kind == "gemm" and min(self.M, self.K, self.N) <= 0:
            raise DimensionError(f"{self.name}: gemm dims must be positive")
        if self.kind == "conv" and min(self.cin, self.height, self.width, self.cout, self.kernel, self.stride) <= 0:
            raise DimensionError(f"{self.name}: conv dims must be positive")

    @property
    def dims(self):
        return im2col_dims(self)

    def to_dict(self):
        d = asdict(self)
        keep = ("M", "K", "N") if self.kind == "gemm" else ("cin", "height", "width", "cout", "kernel", "stride", "pad")
        drop = {"M", "K", "N", "cin", "height", "width", "cout", "kernel", "stride", "pad"} - set(keep)
        return {k: v for k, v in d.items() if k not in drop}

    @classmethod
    def from_dict(cls, d) -> LayerDescriptor:
        return cls(**d)

    def with_density(self, act_density=None, weight_density=None) -> LayerDescriptor:
        d = self.to_dict()
        if act_density is not None:
            d["act_density"] = act_density
        if weight_density is not None:
            d["weight_density"] = weight_density
        return LayerDescriptor(**d)


def conv_out(size: int, kernel: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - kernel) // stride + 1


def im2col_dims(desc: LayerDescriptor):
    """(M, K, N) of the GEMM a layer lowers to."""
    if desc.kind == "gemm":
        return desc.M, desc.K, desc.N
    oh = conv_out(desc.height, desc.kernel, desc.stride, desc.pad)
    ow = conv_out(desc.width, desc.kernel, desc.stride, desc.pad)
    if oh <= 0 or ow <= 0:
        raise DimensionError(f"{desc.name}: non-positive output size {oh}x{ow}")
    return oh * ow, desc.cin * desc.kernel * desc.kernel, desc.cout


def column_densities(n: int, target: float, zipf: float, rng: np.random.Generator) -> np.ndarray:
    """Per-column densities with Zipf-shaped spread and mean ``target``.

    Rank k gets ``min(1, c * k**-zipf)`` with ``c`` found by bisection so the
    mean hits ``target``; ranks are randomly permuted over columns.
    """
    w = np.arange(1, n + 1, dtype=float) ** -zipf
    lo, hi = 0.0, target / w.min() + 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.minimum(1.0, mid * w).mean() < target:
            lo = mid
        else:
            hi = mid
    d = np.minimum(1.0, hi * w)
    return d[rng.permutation(n)]


def _activations(rng, shape, density, L):
    nz = rng.random(shape) < density
    return np.where(nz, rng.integers(1, L + 1, shape), 0).astype(np.int8)


def _weights(rng, K, N, densities):
    nz = rng.random((K, N)) < densities[None, :]
    mag = rng.integers(1, WEIGHT_MAX + 1, (K, N))
    sign = np.where(rng.random((K, N)) < 0.5, -1, 1)
    return np.where(nz, sign * mag, 0).astype(np.int8)


@dataclass
class Workload:
    desc: LayerDescriptor
    seed: int
    samples: np.ndarray         # (S, M, K) validation activations
    weights: np.ndarray         # (K, N)
    test_input: np.ndarray      # (M, K) held-out activations used for simulation
    column_density: np.ndarray = field(default=None)

    @property
    def dims(self):
        return self.desc.dims


def gen_workload(desc: LayerDescriptor, seed: int, L: int = 8, n_samples: int = 8) -> Workload:
    """Deterministic operands; weights, test input and each sample use separate seed substreams."""
    M, K, N = im2col_dims(desc)
    ss = np.random.SeedSequence(seed)
    children = ss.spawn(2 + n_samples)
    wr = np.random.Generator(np.random.PCG64(children[0]))
    dens = column_densities(N, desc.weight_density, desc.zipf, wr)
    B = _weights(wr, K, N, dens)
    test = _activations(np.random.Generator(np.random.PCG64(children[1])), (M, K), desc.act_density, L)
    samples = np.stack([_activations(np.random.Generator(np.random.PCG64(c)), (M, K), desc.act_density, L)
                        for c in children[2:]]) if n_samples else np.zeros((0, M, K), np.int8)
    return Workload(desc, seed, samples, B, test, dens)


def match_counts(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Per-column matched nonzeros summed over rows: sum_m popcount(A[m] & B[:, n])."""
    if A.shape[-1] != B.shape[0]:
        raise DimensionError(f"A has K={A.shape[-1]}, B has K={B.shape[0]}")
    colsum = (A != 0).sum(axis=-2).astype(np.int64)
    return colsum @ (B != 0).astype(np.int64)


def profile(samples, B, q: float = 0.9) -> ColumnStats:
    samples = np.asarray(samples)
    if samples.ndim == 2:
        samples = samples[None]
    counts = np.stack([match_counts(a, B) for a in samples], axis=1)   # (N, S)
    return quantile_stats(counts, q)


# ---------------------------------------------------------------------------
# reference suites


def _conv(name, cin, hw, cout, k, stride=1, pad=None, **kw):
    return LayerDescriptor(name=name, kind="conv", cin=cin, height=hw, width=hw, cout=cout,
                           kernel=k, stride=stride, pad=k // 2 if pad is None else pad, **kw)


def _gemm(name, M, K, N, **kw):
    return LayerDescriptor(name=name, kind="gemm", M=M, K=K, N=N, **kw)


def _models(zipf: float) -> dict:
    # layer shapes echo the named networks at reduced scale: few output
    # pixels, many output channels
    return {
        "vgg": [
            _conv("vgg.conv3", 32, 4, 512, 3, act_density=0.45, weight_density=0.35, zipf=zipf),
            _conv("vgg.conv4", 64, 4, 512, 3, act_density=0.35, weight_density=0.3, zipf=zipf),
            _conv("vgg.conv5", 64, 4, 512, 3, act_density=0.3, weight_density=0.3, zipf=zipf),
            _gemm("vgg.fc", 16, 512, 512, act_density=0.25, weight_density=0.25, zipf=zipf),
        ],
        "resnet": [
            _conv("resnet.b2", 32, 6, 512, 3, act_density=0.4, weight_density=0.4, zipf=zipf),
            _conv("resnet.b3.1x1", 256, 4, 512, 1, act_density=0.35, weight_density=0.4, zipf=zipf),
            _conv("resnet.b3", 48, 4, 512, 3, act_density=0.3, weight_density=0.35, zipf=zipf),
            _conv("resnet.b4", 64, 4, 512, 3, act_density=0.25, weight_density=0.3, zipf=zipf),
        ],
        "googlenet": [
            _conv("googlenet.3x3", 32, 4, 512, 3, act_density=0.4, weight_density=0.35, zipf=zipf),
            _conv("googlenet.5x5", 16, 4, 512, 5, act_density=0.4, weight_density=0.35, zipf=zipf),
            _conv("googlenet.1x1", 192, 4, 512, 1, act_density=0.3, weight_density=0.4, zipf=zipf),
        ],
        "bert": [
            _gemm("bert.qkv", 16, 256, 512, act_density=0.5, weight_density=0.35, zipf=zipf),
            _gemm("bert.ffn1", 16, 256, 512, act_density=0.45, weight_density=0.3, zipf=zipf),
            _gemm("bert.ffn2", 16, 512, 512, act_density=0.3, weight_density=0.3, zipf=zipf),
        ],
    }


SUITES = {"balanced": 0.2, "heterogeneous": 1.2}


def reference_suite(name: str = "heterogeneous") -> dict:
    """Model name -> list of layer descriptors."""
    if name not in SUITES:
        raise ParameterError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    return _models(SUITES[name])


def descriptors_to_json(models: dict) -> str:
    return json.dumps({k: [d.to_dict() for d in v] for k, v in models.items()}, sort_keys=True, indent=1)


def descriptors_from_json(text: str) -> dict:
    data = json.loads(text)
    if isinstance(data, list):
        data = {"model": data}
    return {k: [LayerDescriptor.from_dict(d) for d in v] for k, v in data.items()}
