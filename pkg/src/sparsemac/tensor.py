"""Dense 4-D tensors, value types, sparsity census, and the 16x16 group layout.

Tensors are stored dense in (n, c, h, w) order where n is the sample or
filter axis, c the channel axis, h the row axis and w the column axis.
Values are float32 throughout; BF16 tensors are float32 arrays whose low
16 mantissa bits are zero, so they can flow through the same arithmetic.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

GROUP = 16  # side of a layout group: 16 channel values x 16 row positions


class Kind(enum.Enum):
    """Axis-role tag: what the n axis of a tensor means."""

    A = 0  # activations (n = sample)
    W = 1  # weights (n = filter)
    G = 2  # gradients (n = sample)
    O = 3  # outputs (n = sample)


class DType(enum.Enum):
    F32 = 0
    BF16 = 1


class LayerType(enum.Enum):
    CONV = "conv"
    FC = "fc"


@dataclass(frozen=True)
class ConvShape:
    """Geometry of one layer's sliding-window reduction.

    ``kernel`` and ``out_dims`` follow the (h, w) axis order of Tensor4
    dims. FC layers are the degenerate case whose kernel equals the input
    spatial dims.
    """

    stride: int
    kernel: tuple[int, int]    # extents along (h, w)
    in_channels: int
    out_dims: tuple[int, int]  # output extents along (h, w)
    layer_type: LayerType = LayerType.CONV

    def __post_init__(self):
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if min(self.kernel) < 1 or min(self.out_dims) < 1 or self.in_channels < 1:
            raise ValueError("kernel, out_dims and in_channels must be positive")

    @property
    def in_dims(self) -> tuple[int, int]:
        """Smallest input spatial dims that the output geometry covers."""
        kx, ky = self.kernel
        nox, noy = self.out_dims
        return (self.stride * (nox - 1) + kx, self.stride * (noy - 1) + ky)


@dataclass(frozen=True)
class Tensor4:
    """Dense 4-D tensor with explicit axis semantics.

    ``data`` is an immutable float32 ndarray of shape (n, c, h, w). For
    dtype BF16 every element's bit pattern has 16 zero low-order bits.
    """

    kind: Kind
    dtype: DType
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = np.asarray(self.data, dtype=np.float32)
        if a.ndim != 4:
            raise ValueError(f"Tensor4 data must be 4-D, got shape {a.shape}")
        if self.dtype is DType.BF16:
            bits = a.view(np.uint32)
            if np.any(bits & np.uint32(0xFFFF)):
                raise ValueError("BF16 tensor has non-zero low-order mantissa bits")
        if a is not self.data or a.flags.writeable:
            a = a.copy()
            a.flags.writeable = False
            object.__setattr__(self, "data", a)

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    @staticmethod
    def from_array(a, kind: Kind = Kind.A, dtype: DType = DType.F32) -> "Tensor4":
        return Tensor4(kind=kind, dtype=dtype, data=np.asarray(a, dtype=np.float32))

    @staticmethod
    def zeros(dims, kind: Kind = Kind.A, dtype: DType = DType.F32) -> "Tensor4":
        return Tensor4(kind=kind, dtype=dtype, data=np.zeros(dims, dtype=np.float32))


@dataclass(frozen=True)
class SparsityStats:
    total: int
    zeros: int

    def __post_init__(self):
        if not 0 <= self.zeros <= self.total:
            raise ValueError("zeros must lie in [0, total]")

    @property
    def fraction(self) -> float:
        return self.zeros / self.total if self.total else 0.0


def zero_mask(block) -> int:
    """16-bit mask over a block of 16 values; bit i set iff value i != 0.

    Negative zero counts as zero, NaN counts as non-zero.
    """
    b = np.asarray(block, dtype=np.float32)
    if b.shape != (GROUP,):
        raise ValueError(f"zero_mask expects exactly {GROUP} values, got shape {b.shape}")
    mask = 0
    for i, nz in enumerate(b != 0.0):
        if nz:
            mask |= 1 << i
    return mask


def sparsity_stats(t: Tensor4) -> SparsityStats:
    """Exact census of zero elements (the per-tensor zero counter)."""
    return SparsityStats(total=int(t.size), zeros=int(np.count_nonzero(t.data == 0.0)))


def potential_speedup(stats: SparsityStats) -> float:
    """All-MACs over remaining-MACs after dropping zero-operand MACs.

    Saturates at ``total`` when nothing remains (the all-zero tensor).
    """
    remaining = stats.total - stats.zeros
    if remaining == 0:
        return float(stats.total)
    return stats.total / remaining


# ---------------------------------------------------------------------------
# 16x16 group layout
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GroupId:
    """Coordinates of one 16x16 group: sample, channel base, row, column base.

    A group holds 16 consecutive channel bricks walking along a row, so its
    starting coordinates are aligned by 16 in the channel and column axes.
    """

    n: int
    c0: int  # channel base, multiple of 16
    y: int   # row (h index)
    x0: int  # column base (w index), multiple of 16


@dataclass(frozen=True)
class GroupLayout:
    """A tensor rearranged into 16x16 groups.

    ``groups[k]`` is a 16x16 float32 matrix for ``ids[k]``: block b holds
    the channel brick at column x0+b, i.e. entry [b][j] is element
    (n, c0+j, y, x0+b), zero-padded where c0+j or x0+b fall outside the
    tensor. Groups are ordered channel base fastest, then column base, then
    row (samples outermost). ``pad_count`` counts the zero padding slots so
    sparsity figures can exclude them.
    """

    dims: tuple[int, int, int, int]
    ids: tuple[GroupId, ...]
    groups: np.ndarray  # (num_groups, 16, 16) float32
    pad_count: int


def layout_groups(t: Tensor4) -> GroupLayout:
    """Arrange a tensor into 16x16 groups (channel bricks along each row)."""
    n, c, h, w = t.dims
    cg = -(-c // GROUP)
    xg = -(-w // GROUP)
    num = n * h * xg * cg
    padded = np.zeros((n, cg * GROUP, h, xg * GROUP), dtype=np.float32)
    padded[:, :c, :, :w] = t.data
    groups = np.empty((num, GROUP, GROUP), dtype=np.float32)
    ids = []
    k = 0
    for ni in range(n):
        for y in range(h):                # row, slowest
            for xb in range(xg):          # column base
                for cb in range(cg):      # channel base, fastest
                    blk = padded[ni, cb * GROUP:(cb + 1) * GROUP, y,
                                 xb * GROUP:(xb + 1) * GROUP]
                    groups[k] = blk.T     # [b][j] = (column x0+b, channel c0+j)
                    ids.append(GroupId(n=ni, c0=cb * GROUP, y=y, x0=xb * GROUP))
                    k += 1
    pad = num * GROUP * GROUP - t.size
    return GroupLayout(dims=t.dims, ids=tuple(ids), groups=groups, pad_count=pad)


def ungroup(layout: GroupLayout, kind: Kind = Kind.A, dtype: DType = DType.F32) -> Tensor4:
    """Exact inverse of :func:`layout_groups` (padding discarded)."""
    n, c, h, w = layout.dims
    cg = -(-c // GROUP)
    xg = -(-w // GROUP)
    padded = np.zeros((n, cg * GROUP, h, xg * GROUP), dtype=np.float32)
    for gid, g in zip(layout.ids, layout.groups):
        padded[gid.n, gid.c0:gid.c0 + GROUP, gid.y,
               gid.x0:gid.x0 + GROUP] = g.T
    return Tensor4(kind=kind, dtype=dtype, data=padded[:, :c, :, :w].copy())


def locate(dims, n: int, c: int, h: int, w: int) -> tuple[GroupId, int, int]:
    """Map an element coordinate to (group id, block index, offset in block)."""
    return (GroupId(n=n, c0=(c // GROUP) * GROUP, y=h, x0=(w // GROUP) * GROUP),
            w % GROUP, c % GROUP)


def transpose16(g: np.ndarray, ev=None) -> np.ndarray:
    """Transpose one 16x16 group, as the on-chip transposer does.

    The hardware reads 16 wide blocks and provides 16 wide transposed
    blocks; when an event counter is passed, 32 wide accesses are charged.
    """
    g = np.asarray(g, dtype=np.float32)
    if g.shape != (GROUP, GROUP):
        raise ValueError(f"transpose16 expects a {GROUP}x{GROUP} group, got {g.shape}")
    if ev is not None:
        ev.transposer_ops += 2 * GROUP
    return g.T.copy()


# ---------------------------------------------------------------------------
# BF16 conversion
# ---------------------------------------------------------------------------

def _bf16_round_bits(bits: np.ndarray) -> np.ndarray:
    """Round float32 bit patterns to bfloat16 (round-to-nearest-even)."""
    bits = bits.astype(np.uint32)
    exp = bits & np.uint32(0x7F800000)
    mant = bits & np.uint32(0x007FFFFF)
    is_nan = (exp == np.uint32(0x7F800000)) & (mant != 0)
    rounded = bits + np.uint32(0x7FFF) + ((bits >> np.uint32(16)) & np.uint32(1))
    out = np.where(is_nan, bits | np.uint32(0x00400000), rounded)
    return out & np.uint32(0xFFFF0000)


def bf16_value(x: float) -> float:
    """Round one float to its nearest bfloat16 value (ties to even)."""
    bits = np.float32(x).view(np.uint32)
    return float(_bf16_round_bits(np.array([bits]))[0].view(np.float32))


def to_bf16(t: Tensor4) -> Tensor4:
    """Round an F32 tensor to BF16 storage. Zeros stay zeros; idempotent."""
    if t.dtype is not DType.F32:
        if t.dtype is DType.BF16:
            return t
        raise ValueError(f"to_bf16 expects F32 input, got {t.dtype}")
    bits = t.data.view(np.uint32)
    data = _bf16_round_bits(bits).view(np.float32).reshape(t.dims)
    return Tensor4(kind=t.kind, dtype=DType.BF16, data=data)
