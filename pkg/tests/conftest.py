"""Shared test oracles and generators.

Oracles are deliberately plain transliterations (loops, python lists) kept
independent of the library's vectorized paths.
"""

import numpy as np
import pytest

from sparsemac import ConvShape, DType, Kind, Tensor4
from sparsemac.scheduler import IDLE
from sparsemac.trainops import LayerSpec


def naive_forward(a: np.ndarray, w: np.ndarray, stride: int) -> np.ndarray:
    """Six-loop sliding-window convolution, float64 accumulation."""
    S, C, H, W_ = a.shape
    F, _, kh, kw = w.shape
    noh = (H - kh) // stride + 1
    now = (W_ - kw) // stride + 1
    out = np.zeros((S, F, noh, now), dtype=np.float64)
    for s in range(S):
        for f in range(F):
            for oh in range(noh):
                for ow in range(now):
                    acc = 0.0
                    for c in range(C):
                        for i in range(kh):
                            for j in range(kw):
                                acc += float(a[s, c, oh * stride + i, ow * stride + j]) \
                                    * float(w[f, c, i, j])
                    out[s, f, oh, ow] = acc
    return out


def naive_schedule_step(zbits, options, levels):
    """List-based transliteration of the levelled priority selection."""
    z = [list(row) for row in zbits]
    ms = [IDLE] * len(options)
    for group in levels:
        picks = []
        for lane in group:
            for k, (step, src) in enumerate(options[lane]):
                if z[step][src]:
                    ms[lane] = k
                    picks.append((step, src))
                    break
        for step, src in picks:
            z[step][src] = False
    as_count = 0
    for row in z:
        if any(row):
            break
        as_count += 1
    return ms, z, as_count


def int_values(rng, n, sparsity=0.0, lo=-8, hi=8):
    """Small-integer floats: sums stay exactly representable in float32."""
    v = rng.integers(lo, hi + 1, size=n).astype(np.float32)
    v[v == 0] = np.float32(1.0)
    if sparsity > 0:
        v[rng.random(n) < sparsity] = np.float32(0.0)
    return v


def int_tensor(rng, dims, sparsity, kind=Kind.A):
    data = int_values(rng, int(np.prod(dims)), sparsity).reshape(dims)
    return Tensor4(kind=kind, dtype=DType.F32, data=data)


def random_layer(rng, max_channels=20, max_kernel=3, max_out=3,
                 max_filters=4, max_samples=2, ragged=False):
    """A random small exact-fit layer (optionally with uncovered rows)."""
    C = int(rng.integers(1, max_channels + 1))
    k = int(rng.integers(1, max_kernel + 1))
    st = int(rng.integers(1, 3))
    no = int(rng.integers(1, max_out + 1))
    S = int(rng.integers(1, max_samples + 1))
    F = int(rng.integers(1, max_filters + 1))
    ih = st * (no - 1) + k
    iw = ih
    if ragged:
        ih += int(rng.integers(0, st))
        iw += int(rng.integers(0, st))
    shape = ConvShape(stride=st, kernel=(k, k), in_channels=C, out_dims=(no, no))
    return LayerSpec(layer_id=0, shape=shape, a_dims=(S, C, ih, iw),
                     w_dims=(F, C, k, k), g_dims=(S, F, no, no))


def layer_tensors(rng, layer: LayerSpec, s_a=0.4, s_g=0.4, s_w=0.0):
    a = int_tensor(rng, layer.a_dims, s_a, Kind.A)
    w = int_tensor(rng, layer.w_dims, s_w, Kind.W)
    g = int_tensor(rng, layer.g_dims, s_g, Kind.G)
    return a, w, g


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
