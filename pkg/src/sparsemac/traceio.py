"""Binary trace container (TDTR) and synthetic sparse tensor generation.

File layout, little-endian throughout:

    magic   4 bytes ASCII "TDTR"
    u32     version (1)
    u32     record count
    record:
        u16     name length, then UTF-8 name
        u8      kind: 0=A 1=W 2=G 3=O 4=scheduled
        u8      dtype: 0=F32 1=BF16
        u32     layer id
        u32     epoch id
        u8      stride
        u16     Kx, u16 Ky
        u32 x4  dims (n, c, h, w)
        payload

Dense payloads hold n*c*h*w values in C order over (n, c, h, w): F32 as 4
bytes, BF16 as the upper 2 bytes of the widened pattern. Scheduled
payloads (kind 4) carry a u32 byte length followed by the group blob
written by :func:`pack_scheduled`.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field

import numpy as np

from .compress import AllocMode, ScheduledGroup
from .tensor import DType, Kind, Tensor4

MAGIC = b"TDTR"
VERSION = 1
_MAX_ELEMENTS = 1 << 32  # dim-overflow guard on n*c*h*w


class TraceError(Exception):
    """Base class for trace container failures."""


class BadMagicError(TraceError):
    pass


class VersionError(TraceError):
    pass


class TruncationError(TraceError):
    pass


class DimOverflowError(TraceError):
    pass


class RecordKind(enum.Enum):
    A = 0
    W = 1
    G = 2
    O = 3
    SCHEDULED = 4


_KIND_TO_TENSOR = {RecordKind.A: Kind.A, RecordKind.W: Kind.W,
                   RecordKind.G: Kind.G, RecordKind.O: Kind.O}


@dataclass
class TraceRecord:
    name: str
    kind: RecordKind
    dtype: DType
    layer_id: int
    epoch_id: int
    stride: int
    kernel: tuple[int, int]
    dims: tuple[int, int, int, int]
    tensor: Tensor4 | None = None        # dense kinds
    scheduled: bytes | None = None       # kind SCHEDULED


@dataclass
class TraceFile:
    records: list[TraceRecord] = field(default_factory=list)


def _payload_f32(t: Tensor4) -> bytes:
    return t.data.astype("<f4").tobytes()


def _payload_bf16(t: Tensor4) -> bytes:
    bits = t.data.astype("<f4").view("<u4")
    return (bits >> np.uint32(16)).astype("<u2").tobytes()


def write_trace(path, tf: TraceFile) -> None:
    out = bytearray()
    out += MAGIC
    out += struct.pack("<II", VERSION, len(tf.records))
    for rec in tf.records:
        name = rec.name.encode("utf-8")
        out += struct.pack("<H", len(name)) + name
        out += struct.pack("<BBIIBHH", rec.kind.value, rec.dtype.value,
                           rec.layer_id, rec.epoch_id, rec.stride,
                           rec.kernel[0], rec.kernel[1])
        out += struct.pack("<IIII", *rec.dims)
        if rec.kind is RecordKind.SCHEDULED:
            if rec.scheduled is None:
                raise ValueError(f"record {rec.name}: scheduled payload missing")
            out += struct.pack("<I", len(rec.scheduled)) + rec.scheduled
        else:
            if rec.tensor is None:
                raise ValueError(f"record {rec.name}: tensor payload missing")
            if rec.tensor.dims != rec.dims:
                raise ValueError(f"record {rec.name}: dims disagree with tensor")
            out += (_payload_bf16(rec.tensor) if rec.dtype is DType.BF16
                    else _payload_f32(rec.tensor))
    with open(path, "wb") as fh:
        fh.write(bytes(out))


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise TruncationError(f"needed {n} bytes at offset {self.pos}, "
                                  f"file has {len(self.buf)}")
        chunk = self.buf[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def read_trace(path) -> TraceFile:
    with open(path, "rb") as fh:
        buf = fh.read()
    r = _Reader(buf)
    if len(buf) < 4 or r.take(4) != MAGIC:
        raise BadMagicError("not a TDTR file")
    version, count = r.unpack("<II")
    if version != VERSION:
        raise VersionError(f"unsupported version {version}")
    tf = TraceFile()
    for _ in range(count):
        (nlen,) = r.unpack("<H")
        name = r.take(nlen).decode("utf-8")
        kind_v, dtype_v, layer_id, epoch_id, stride, kx, ky = r.unpack("<BBIIBHH")
        try:
            kind = RecordKind(kind_v)
            dtype = DType(dtype_v)
        except ValueError as exc:
            raise TraceError(f"record {name}: bad kind/dtype byte") from exc
        dims = r.unpack("<IIII")
        n_elem = 1
        for d in dims:
            n_elem *= d
        if n_elem > _MAX_ELEMENTS:
            raise DimOverflowError(f"record {name}: {n_elem} elements exceed "
                                   f"the {_MAX_ELEMENTS} cap")
        rec = TraceRecord(name=name, kind=kind, dtype=dtype, layer_id=layer_id,
                          epoch_id=epoch_id, stride=stride, kernel=(kx, ky),
                          dims=dims)
        if kind is RecordKind.SCHEDULED:
            (blob_len,) = r.unpack("<I")
            rec.scheduled = r.take(blob_len)
        else:
            if dtype is DType.BF16:
                raw = np.frombuffer(r.take(2 * n_elem), dtype="<u2")
                bits = raw.astype(np.uint32) << np.uint32(16)
                data = bits.view("<f4").reshape(dims)
            else:
                data = np.frombuffer(r.take(4 * n_elem), dtype="<f4").reshape(dims)
            rec.tensor = Tensor4(kind=_KIND_TO_TENSOR[kind], dtype=dtype,
                                 data=data.astype(np.float32))
        tf.records.append(rec)
    if r.pos != len(buf):
        raise TraceError(f"{len(buf) - r.pos} trailing bytes after the last record")
    return tf


# ---------------------------------------------------------------------------
# Scheduled-group blobs (kind 4 payloads)
# ---------------------------------------------------------------------------

def pack_scheduled(groups) -> bytes:
    """Serialize ScheduledGroups: counts, anchors, then (lane, idx, value)."""
    out = bytearray(struct.pack("<I", len(groups)))
    for g in groups:
        out += struct.pack("<HHBH", g.lanes, g.dense_rows,
                           0 if g.mode is AllocMode.PACKED else 1,
                           len(g.steps))
        for anchor, entries in zip(g.anchors, g.steps):
            out += struct.pack("<HH", anchor, len(entries))
            for lane, value, idx in entries:
                out += struct.pack("<BBf", lane, idx, value)
    return bytes(out)


def unpack_scheduled(blob: bytes) -> list[ScheduledGroup]:
    r = _Reader(blob)
    (count,) = r.unpack("<I")
    groups = []
    for _ in range(count):
        lanes, dense_rows, mode_v, nsteps = r.unpack("<HHBH")
        steps, anchors = [], []
        for _ in range(nsteps):
            anchor, nent = r.unpack("<HH")
            entries = []
            for _ in range(nent):
                lane, idx, value = r.unpack("<BBf")
                entries.append((lane, np.float32(value), idx))
            anchors.append(anchor)
            steps.append(tuple(entries))
        groups.append(ScheduledGroup(
            lanes=lanes, dense_rows=dense_rows,
            mode=AllocMode.PACKED if mode_v == 0 else AllocMode.SLOTTED,
            steps=tuple(steps), anchors=tuple(anchors)))
    return groups


# ---------------------------------------------------------------------------
# Synthetic tensors
# ---------------------------------------------------------------------------

class SynthPattern(enum.Enum):
    IID = "iid"
    CHANNEL_CLUSTERED = "channel_clustered"


@dataclass(frozen=True)
class SynthSpec:
    dims: tuple[int, int, int, int]
    sparsity: float
    seed: int = 0
    pattern: SynthPattern = SynthPattern.IID
    dense_channel_fraction: float = 0.25  # CHANNEL_CLUSTERED only

    def __post_init__(self):
        if not 0.0 <= self.sparsity <= 1.0:
            raise ValueError(f"sparsity {self.sparsity} outside [0, 1]")
        if not 0.0 < self.dense_channel_fraction < 1.0:
            raise ValueError("dense channel fraction must lie in (0, 1)")


_DENSE_CHANNEL_ZEROS = 0.05  # dense channels keep under 10% zeros


def synth_tensor(spec: SynthSpec, kind: Kind = Kind.A) -> Tensor4:
    """Deterministic sparse tensor: non-zeros uniform in [-1, 1] minus zero."""
    rng = np.random.default_rng(spec.seed)
    n = int(np.prod(spec.dims))
    vals = rng.uniform(-1.0, 1.0, n).astype(np.float32)
    vals[vals == 0.0] = np.float32(0.5)
    if spec.pattern is SynthPattern.IID:
        vals[rng.random(n) < spec.sparsity] = 0.0
        data = vals.reshape(spec.dims)
    else:
        d = spec.dense_channel_fraction
        s_sparse = (spec.sparsity - d * _DENSE_CHANNEL_ZEROS) / (1.0 - d)
        if not 0.9 < s_sparse <= 1.0:
            raise ValueError(f"target sparsity {spec.sparsity} not reachable with "
                             f"{d:.2f} dense channels (needs sparse-channel zero "
                             f"fraction in (0.9, 1], got {s_sparse:.3f})")
        data = vals.reshape(spec.dims)
        channels = spec.dims[1]
        dense_ch = rng.choice(channels, size=max(1, round(d * channels)),
                              replace=False)
        rate = np.full(channels, s_sparse)
        rate[dense_ch] = _DENSE_CHANNEL_ZEROS
        drop = rng.random(spec.dims) < rate[None, :, None, None]
        data = np.where(drop, np.float32(0.0), data)
    return Tensor4(kind=kind, dtype=DType.F32, data=data)
