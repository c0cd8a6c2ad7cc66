"""The three training computations, weight update, and tile lowering.

Forward pass convolves weights with activations; the backward pass
convolves output gradients with reconstructed-and-rotated filters to get
input gradients, and with activations to get weight gradients. Gradients
are dilated by the stride in the backward convolutions. Fully connected
layers run through the same code paths as the degenerate convolution whose
kernel equals the input spatial dims.

Lowering turns each op into per-output operand streams of 16-value channel
bricks so the PE and tile simulators can execute them; the scheduled side
follows the usual rule (activations forward, gradients backward, whichever
tensor is sparser for the weight gradients).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .energy import EventCounters
from .tensor import (GROUP, ConvShape, DType, Kind, LayerType, Tensor4,
                     layout_groups, sparsity_stats)


class OpKind(enum.Enum):
    FWD = "fwd"
    IGRAD = "igrad"
    WGRAD = "wgrad"


class SidePolicy(enum.Enum):
    AUTO = "auto"   # activations fwd, gradients backward, argmax for wgrad
    A = "a"         # force the activation-like operand onto the scheduled port
    B = "b"         # force the other operand onto the scheduled port
    BOTH = "both"   # canonical assignment, both zero masks visible


@dataclass(frozen=True)
class LayerSpec:
    layer_id: int
    shape: ConvShape
    a_dims: tuple[int, int, int, int]
    w_dims: tuple[int, int, int, int]
    g_dims: tuple[int, int, int, int]

    def __post_init__(self):
        s, c, h, w = self.a_dims
        f, wc, kx, ky = self.w_dims
        gs, gf, nox, noy = self.g_dims
        sh = self.shape
        if (kx, ky) != sh.kernel or wc != sh.in_channels or c != sh.in_channels:
            raise ValueError(f"layer {self.layer_id}: weight dims inconsistent")
        if (nox, noy) != sh.out_dims or gf != f or gs != s:
            raise ValueError(f"layer {self.layer_id}: gradient dims inconsistent")
        ix, iy = sh.in_dims
        if h < ix or w < iy:
            raise ValueError(f"layer {self.layer_id}: input smaller than the "
                             f"window coverage {sh.in_dims}")
        if sh.layer_type is LayerType.FC and sh.kernel != (h, w):
            raise ValueError("FC layers need kernel equal to the input dims")


@dataclass(frozen=True)
class TrainHyper:
    learning_rate: float
    batch_size: int

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1:
            raise ValueError("need learning_rate > 0 and batch_size >= 1")


@dataclass(frozen=True)
class WorkUnit:
    """One output's operand pair streams, already brick-aligned."""

    a_stream: np.ndarray
    b_stream: np.ndarray
    out_coord: tuple
    side: str


def _check(a: Tensor4, w: Tensor4, shape: ConvShape):
    S, C, H, Wd = a.dims
    F, Cw, Kx, Ky = w.dims
    if Cw != C or C != shape.in_channels or (Kx, Ky) != shape.kernel:
        raise ValueError(f"tensor dims {a.dims} / {w.dims} do not match {shape}")
    ix, iy = shape.in_dims
    if H < ix or Wd < iy:
        raise ValueError(f"input {H}x{Wd} smaller than window coverage {ix}x{iy}")


def forward_conv(a: Tensor4, w: Tensor4, shape: ConvShape) -> Tensor4:
    """Sliding-window 3-D convolution of each filter over the input."""
    _check(a, w, shape)
    st = shape.stride
    kx, ky = shape.kernel
    nox, noy = shape.out_dims
    S = a.dims[0]
    F = w.dims[0]
    out = np.zeros((S, F, nox, noy), dtype=np.float32)
    for i in range(kx):
        for j in range(ky):
            win = a.data[:, :, i:i + st * nox:st, j:j + st * noy:st]
            out += np.einsum("scxy,fc->sfxy", win, w.data[:, :, i, j],
                             dtype=np.float32, casting="same_kind")
    return Tensor4(kind=Kind.O, dtype=DType.F32, data=out)


def reconstruct_rotated_filters(w: Tensor4) -> Tensor4:
    """Exchange the filter and channel axes and rotate spatially by 180 degrees."""
    rot = np.ascontiguousarray(w.data[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
    return Tensor4(kind=Kind.W, dtype=w.dtype, data=rot)


def dilate(g: Tensor4, stride: int) -> Tensor4:
    """Insert stride-1 zeros between adjacent spatial elements."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if stride == 1:
        return g
    S, C, H, Wd = g.dims
    out = np.zeros((S, C, stride * (H - 1) + 1, stride * (Wd - 1) + 1),
                   dtype=np.float32)
    out[:, :, ::stride, ::stride] = g.data
    return Tensor4(kind=g.kind, dtype=g.dtype, data=out)


def _padded_dilated(g_o: Tensor4, shape: ConvShape) -> np.ndarray:
    """Dilated output gradients with a kernel-1 zero border on each side."""
    kx, ky = shape.kernel
    gd = dilate(g_o, shape.stride).data
    return np.pad(gd, ((0, 0), (0, 0), (kx - 1, kx - 1), (ky - 1, ky - 1)))


def input_grad_conv(g_o: Tensor4, w: Tensor4, shape: ConvShape,
                    a_dims=None) -> Tensor4:
    """Gradient of the loss w.r.t. the layer input.

    Full-border convolution of the dilated output gradients with the
    reconstructed rotated filters. ``a_dims`` zero-extends the result when
    the input had rows the windows never covered.
    """
    S, F, nox, noy = g_o.dims
    if (nox, noy) != shape.out_dims or F != w.dims[0]:
        raise ValueError(f"gradient dims {g_o.dims} do not match {shape}")
    kx, ky = shape.kernel
    wr = reconstruct_rotated_filters(w).data  # (C, F, Kx, Ky)
    gp = _padded_dilated(g_o, shape)
    ix, iy = shape.in_dims
    out = np.zeros((S, wr.shape[0], ix, iy), dtype=np.float32)
    for i in range(kx):
        for j in range(ky):
            win = gp[:, :, i:i + ix, j:j + iy]
            out += np.einsum("sfxy,cf->scxy", win, wr[:, :, i, j],
                             dtype=np.float32, casting="same_kind")
    if a_dims is not None and tuple(a_dims[2:]) != (ix, iy):
        full = np.zeros(a_dims, dtype=np.float32)
        full[:, :, :ix, :iy] = out
        out = full
    return Tensor4(kind=Kind.G, dtype=DType.F32, data=out)


def weight_grad_conv(g_o: Tensor4, a: Tensor4, shape: ConvShape) -> Tensor4:
    """Gradient of the loss w.r.t. the weights, summed over samples.

    The 2-D convolution of each sample's input with its dilated output
    gradients, restricted to the kernel extent.
    """
    S, F, nox, noy = g_o.dims
    if (nox, noy) != shape.out_dims or a.dims[0] != S:
        raise ValueError(f"gradient dims {g_o.dims} do not match {shape}")
    st = shape.stride
    kx, ky = shape.kernel
    C = a.dims[1]
    out = np.zeros((F, C, kx, ky), dtype=np.float32)
    for i in range(kx):
        for j in range(ky):
            win = a.data[:, :, i:i + st * nox:st, j:j + st * noy:st]
            out[:, :, i, j] = np.einsum("sfxy,scxy->fc", g_o.data, win,
                                        dtype=np.float32, casting="same_kind")
    return Tensor4(kind=Kind.G, dtype=DType.F32, data=out)


def weight_update(w: Tensor4, grads, hyper: TrainHyper) -> Tensor4:
    """One mini-batch step: subtract the learning-rate-scaled mean gradient."""
    if len(grads) != hyper.batch_size:
        raise ValueError(f"expected {hyper.batch_size} per-sample gradients, "
                         f"got {len(grads)}")
    total = np.zeros(w.dims, dtype=np.float32)
    for g in grads:
        if g.dims != w.dims:
            raise ValueError("gradient dims do not match the weights")
        total += g.data
    new = w.data - np.float32(hyper.learning_rate) * (total / np.float32(hyper.batch_size))
    return Tensor4(kind=Kind.W, dtype=w.dtype, data=new.astype(np.float32))


# ---------------------------------------------------------------------------
# Lowering onto PE/tile operand streams
# ---------------------------------------------------------------------------

def _brick_pad(n: int) -> int:
    return -(-n // GROUP) * GROUP


@dataclass(frozen=True)
class LoweredOp:
    """Deduplicated operand streams of one lowered operation.

    Every output is a (scheduled stream, passenger stream) pair:
    ``out_index[coord] = (b_idx, a_idx)``. Rows of ``b_matrix`` feed the
    scheduled (B) port, rows of ``a_matrix`` the passenger (A) port.
    """

    op: OpKind
    b_matrix: np.ndarray
    a_matrix: np.ndarray
    out_coords: list
    pair_index: np.ndarray   # (num_outputs, 2) -> (b row, a row)
    side: str
    out_dims: tuple


def _pad_channels(data: np.ndarray) -> np.ndarray:
    """Zero-pad the channel axis to a whole number of bricks."""
    pad = _brick_pad(data.shape[1]) - data.shape[1]
    if pad:
        data = np.pad(data, ((0, 0), (0, pad), (0, 0), (0, 0)))
    return data


def _gather_window_streams(data: np.ndarray, coords, kx: int, ky: int,
                           stride: int = 1, ox_scale: bool = True) -> np.ndarray:
    """Channel-first window streams: per coord, bricks of channels per tap."""
    padded = _pad_channels(data)
    cs = np.array([c[0] for c in coords])
    xs = np.array([c[1] for c in coords]) * (stride if ox_scale else 1)
    ys = np.array([c[2] for c in coords]) * (stride if ox_scale else 1)
    taps = [(i, j) for i in range(kx) for j in range(ky)]
    # (coords, taps, channels) then taps-major flatten
    cols = np.stack([padded[cs, :, xs + i, ys + j] for i, j in taps], axis=1)
    return np.ascontiguousarray(cols.reshape(len(coords), -1))


def _filter_streams(filters: np.ndarray) -> np.ndarray:
    """Per-filter streams in the same tap-major, channel-brick order."""
    padded = _pad_channels(filters)
    F = filters.shape[0]
    # (F, kx, ky, Cpad) taps-major
    return np.ascontiguousarray(
        padded.transpose(0, 2, 3, 1).reshape(F, -1))


def lower_op(op: OpKind, layer: LayerSpec, a: Tensor4, w: Tensor4,
             g_o: Tensor4, policy: SidePolicy = SidePolicy.AUTO) -> LoweredOp:
    """Build the deduplicated stream matrices for one training op."""
    sh = layer.shape
    st = sh.stride
    kx, ky = sh.kernel
    nox, noy = sh.out_dims
    S = a.dims[0]
    F = w.dims[0]
    C = sh.in_channels

    if op is OpKind.FWD:
        win_coords = [(s, x, y) for s in range(S) for x in range(nox) for y in range(noy)]
        windows = _gather_window_streams(a.data, win_coords, kx, ky, stride=st)
        filters = _filter_streams(w.data)
        sched_is_act = policy in (SidePolicy.AUTO, SidePolicy.A, SidePolicy.BOTH)
        coords, pairs = [], []
        for wi, (s, x, y) in enumerate(win_coords):
            for f in range(F):
                coords.append((s, f, x, y))
                pairs.append((wi, f))
        b_mat, a_mat = (windows, filters) if sched_is_act else (filters, windows)
        if not sched_is_act:
            pairs = [(f, wi) for (wi, f) in pairs]
        side = "A" if sched_is_act else "W"
        out_dims = (S, F, nox, noy)

    elif op is OpKind.IGRAD:
        ix, iy = sh.in_dims
        gp = _padded_dilated(g_o, sh)
        win_coords = [(s, x, y) for s in range(S) for x in range(ix) for y in range(iy)]
        windows = _gather_window_streams(gp, win_coords, kx, ky, ox_scale=False)
        filters = _filter_streams(reconstruct_rotated_filters(w).data)
        sched_is_grad = policy in (SidePolicy.AUTO, SidePolicy.A, SidePolicy.BOTH)
        coords, pairs = [], []
        for wi, (s, x, y) in enumerate(win_coords):
            for c in range(C):
                coords.append((s, c, x, y))
                pairs.append((wi, c))
        b_mat, a_mat = (windows, filters) if sched_is_grad else (filters, windows)
        if not sched_is_grad:
            pairs = [(c, wi) for (wi, c) in pairs]
        side = "G" if sched_is_grad else "W"
        out_dims = (S, C, ix, iy)

    elif op is OpKind.WGRAD:
        # gradient bricks run along the column axis, the order the
        # transposed 16x16 groups supply them in
        gd = dilate(g_o, st).data
        dx, dy = gd.shape[2], gd.shape[3]
        pad = _brick_pad(dy)
        gdp = np.pad(gd, ((0, 0), (0, 0), (0, 0), (0, pad - dy)))
        # (F, S, dx, pad) flattened sample-major, then row, then column run
        g_rows = np.ascontiguousarray(
            gdp.transpose(1, 0, 2, 3).reshape(F, -1))
        a_keys = [(c, i, j) for c in range(C) for i in range(kx) for j in range(ky)]
        blocks = []
        for i in range(kx):
            for j in range(ky):
                win = a.data[:, :, i:i + dx, j:j + dy]
                winp = np.pad(win, ((0, 0), (0, 0), (0, 0), (0, pad - dy)))
                blocks.append(winp.transpose(1, 0, 2, 3).reshape(C, -1))
        # index (c, i, j): taps change fastest within a channel
        a_rows = np.ascontiguousarray(
            np.stack(blocks, axis=1).reshape(C * kx * ky, -1))
        if policy is SidePolicy.AUTO or policy is SidePolicy.BOTH:
            sched_is_grad = (sparsity_stats(g_o).fraction >= sparsity_stats(a).fraction)
        else:
            sched_is_grad = policy is SidePolicy.A
        coords, pairs = [], []
        for f in range(F):
            for ai, (c, i, j) in enumerate(a_keys):
                coords.append((f, c, i, j))
                pairs.append((f, ai) if sched_is_grad else (ai, f))
        b_mat, a_mat = (g_rows, a_rows) if sched_is_grad else (a_rows, g_rows)
        side = "G" if sched_is_grad else "A"
        out_dims = (F, C, kx, ky)

    else:
        raise ValueError(f"unknown op {op}")

    return LoweredOp(op=op, b_matrix=b_mat, a_matrix=a_mat, out_coords=coords,
                     pair_index=np.asarray(pairs, dtype=np.int64), side=side,
                     out_dims=out_dims)


def dense_reference(lo: LoweredOp) -> np.ndarray:
    """Dot products of every lowered pair, reshaped to the op's output dims."""
    full = lo.b_matrix @ lo.a_matrix.T
    flat = full[lo.pair_index[:, 0], lo.pair_index[:, 1]].astype(np.float32)
    out = np.zeros(lo.out_dims, dtype=np.float32)
    for coord, v in zip(lo.out_coords, flat):
        out[coord] = v
    return out


def lower_to_tile(op: OpKind, layer: LayerSpec, a: Tensor4, w: Tensor4,
                  g_o: Tensor4, policy: SidePolicy = SidePolicy.AUTO,
                  ev: EventCounters | None = None) -> tuple[list[WorkUnit], str]:
    """Emit per-output work units plus the chosen scheduled-side tag.

    Transposer work is charged when the access order needs the on-chip
    transpose: the filters for the input gradients, the gradients for the
    weight gradients.
    """
    lo = lower_op(op, layer, a, w, g_o, policy)
    if ev is not None:
        if op is OpKind.IGRAD:
            ev.transposer_ops += 2 * GROUP * len(layout_groups(w).ids)
        elif op is OpKind.WGRAD:
            ev.transposer_ops += 2 * GROUP * len(layout_groups(g_o).ids)
    units = []
    for coord, (bi, ai) in zip(lo.out_coords, lo.pair_index):
        units.append(WorkUnit(a_stream=lo.a_matrix[ai], b_stream=lo.b_matrix[bi],
                              out_coord=coord, side=lo.side))
    return units, lo.side


def functional_op(op: OpKind, layer: LayerSpec, a: Tensor4, w: Tensor4,
                  g_o: Tensor4) -> Tensor4:
    if op is OpKind.FWD:
        return forward_conv(a, w, layer.shape)
    if op is OpKind.IGRAD:
        return input_grad_conv(g_o, w, layer.shape)
    if op is OpKind.WGRAD:
        return weight_grad_conv(g_o, a, layer.shape)
    raise ValueError(f"unknown op {op}")


def mac_counts(layer: LayerSpec) -> dict:
    """Dense MAC counts of the three lowered ops (padding included)."""
    sh = layer.shape
    kx, ky = sh.kernel
    nox, noy = sh.out_dims
    S = layer.a_dims[0]
    F = layer.w_dims[0]
    C = sh.in_channels
    ix, iy = sh.in_dims
    dx = sh.stride * (nox - 1) + 1
    dy = sh.stride * (noy - 1) + 1
    return {
        OpKind.FWD: S * nox * noy * F * kx * ky * _brick_pad(C),
        OpKind.IGRAD: S * ix * iy * C * kx * ky * _brick_pad(F),
        OpKind.WGRAD: F * C * kx * ky * S * dx * _brick_pad(dy),
    }
