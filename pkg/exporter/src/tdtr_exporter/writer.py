"""Standalone TDTR serializer.

Implements the trace container format from scratch so the exporter depends
only on the wire format, not on the simulator package. Layout (all fields
little-endian):

    magic   4 bytes ASCII "TDTR"
    u32     version (1)
    u32     record count
    record:
        u16     name length, then UTF-8 name
        u8      kind: 0=A 1=W 2=G 3=O
        u8      dtype: 0=F32 1=BF16
        u32     layer id
        u32     epoch id
        u8      stride
        u16     Kx, u16 Ky
        u32 x4  dims (n, c, h, w)
        payload n*c*h*w float32 values in C order (BF16: upper 2 bytes)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"TDTR"
VERSION = 1

KIND_A, KIND_W, KIND_G, KIND_O = 0, 1, 2, 3
DTYPE_F32 = 0


@dataclass
class Record:
    name: str
    kind: int
    layer_id: int
    epoch_id: int
    stride: int
    kernel: tuple[int, int]
    data: np.ndarray  # (n, c, h, w) float32

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.ndim != 4:
            raise ValueError(f"record {self.name}: need 4-D data, "
                             f"got shape {self.data.shape}")


def write_tdtr(path, records) -> None:
    out = bytearray()
    out += MAGIC
    out += struct.pack("<II", VERSION, len(records))
    for rec in records:
        name = rec.name.encode("utf-8")
        out += struct.pack("<H", len(name)) + name
        out += struct.pack("<BBIIBHH", rec.kind, DTYPE_F32, rec.layer_id,
                           rec.epoch_id, rec.stride,
                           rec.kernel[0], rec.kernel[1])
        out += struct.pack("<IIII", *rec.data.shape)
        out += rec.data.astype("<f4", copy=False).tobytes()
    with open(path, "wb") as fh:
        fh.write(bytes(out))
