"""One processing element: dense baseline and sparse staging-buffer datapath.

The dense PE multiplies ``lanes`` operand pairs per cycle and accumulates
them through an adder tree in row-major lane order. The sparse PE fronts
the multipliers with a ``depth``-row staging buffer per operand side and a
scheduler that moves effectual pairs forward in time and across lanes; both
sides move in tandem under one per-lane select signal.

Accumulation order differs between the two datapaths, so equality is
asserted on exactly representable values (small-integer floats) rather
than with a float tolerance.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from . import scheduler as sched
from .energy import EventCounters
from .scheduler import ConnectivityMap, LevelPartition
from .tensor import DType


class PEMode(enum.Enum):
    DENSE = "dense"
    SPARSE_B = "sparse_b"        # scheduler sees only the B-side zero bits
    SPARSE_BOTH = "sparse_both"  # zero bits of both sides ANDed


@dataclass(frozen=True)
class PEConfig:
    lanes: int = 16
    depth: int = 3
    mode: PEMode = PEMode.SPARSE_B
    dtype: DType = DType.F32


@dataclass
class PERunResult:
    accumulator: float
    cycles: int
    events: EventCounters = field(default_factory=EventCounters)


class StagingBuffer:
    """Both operand sides of one staging window plus its zero-bit matrix.

    Holds ``depth`` rows of ``lanes`` value pairs and the Z bits derived
    from them under the PE's extraction mode; ``cursor`` points at the next
    stream row to load. Z bits are always consistent with the stored
    values: a set bit implies the mode's operands at that slot are
    non-zero (consumed bits are cleared, never resurrected).
    """

    def __init__(self, pa, pb, cfg: PEConfig, ev: EventCounters):
        self.pa, self.pb = pa, pb
        self.cfg = cfg
        self.rows = pa.shape[0]
        depth, lanes = cfg.depth, cfg.lanes
        self.a = np.zeros((depth, lanes), dtype=np.float32)
        self.b = np.zeros((depth, lanes), dtype=np.float32)
        self.z = np.zeros((depth, lanes), dtype=bool)
        self.cursor = 0
        filled = min(depth, self.rows)
        for d in range(filled):
            self._load_row(d, d)
        ev.staging_writes += 2 * filled * lanes
        self.cursor = filled

    def _mask(self, r):
        if r >= self.rows:
            return np.zeros(self.cfg.lanes, dtype=bool)
        if self.cfg.mode is PEMode.SPARSE_B:
            return self.pb[r] != 0
        return (self.pa[r] != 0) & (self.pb[r] != 0)

    def _load_row(self, d, r):
        if r < self.rows:
            self.a[d], self.b[d] = self.pa[r], self.pb[r]
        else:
            self.a[d] = 0.0
            self.b[d] = 0.0
        self.z[d] = self._mask(r)

    def advance(self, z_after, k: int, ev: EventCounters):
        """Drop ``k`` drained leading rows and refill from the stream."""
        self.z = sched.advance_window(z_after, [self._mask(self.cursor + i)
                                                for i in range(k)], k)
        self.a = np.roll(self.a, -k, axis=0)
        self.b = np.roll(self.b, -k, axis=0)
        for i in range(k):
            r = self.cursor + i
            d = self.cfg.depth - k + i
            if r < self.rows:
                self.a[d], self.b[d] = self.pa[r], self.pb[r]
                ev.staging_writes += 2 * self.cfg.lanes
            else:
                self.a[d] = 0.0
                self.b[d] = 0.0
        self.cursor += k

    def consistent(self) -> bool:
        both = ((self.a != 0) & (self.b != 0) if self.cfg.mode is PEMode.SPARSE_BOTH
                else self.b != 0)
        return bool(np.all(~self.z | both))


def _pad_streams(a, b, lanes):
    a = np.asarray(a, dtype=np.float32).ravel()
    b = np.asarray(b, dtype=np.float32).ravel()
    if a.size != b.size:
        raise ValueError(f"stream length mismatch: {a.size} vs {b.size}")
    rows = -(-a.size // lanes) if a.size else 0
    pa = np.zeros((rows, lanes), dtype=np.float32)
    pb = np.zeros((rows, lanes), dtype=np.float32)
    pa.ravel()[:a.size] = a
    pb.ravel()[:b.size] = b
    return pa, pb, rows


def run_dense(a, b, cfg: PEConfig) -> PERunResult:
    """Process every pair in original order, zeros included: the baseline."""
    pa, pb, rows = _pad_streams(a, b, cfg.lanes)
    acc = np.float32(0.0)
    for r in range(rows):
        acc = acc + np.sum(pa[r] * pb[r], dtype=np.float32)
    ev = EventCounters(
        macs_issued=rows * cfg.lanes,
        macs_effectual=int(np.count_nonzero((pa != 0) & (pb != 0))),
        cycles=rows,
    )
    return PERunResult(accumulator=float(acc), cycles=rows, events=ev)


def run_sparse(a, b, cfg: PEConfig, cmap: ConnectivityMap,
               levels: LevelPartition) -> PERunResult:
    """Process a stream through the staging buffers and scheduler.

    Cycle loop: schedule one step over the window's Z, multiply the selected
    pairs (idle lanes contribute a hard-wired 0*0), then advance the window
    by the drained row count and refill from the stream.
    """
    if cfg.mode is PEMode.DENSE:
        raise ValueError("run_sparse requires a sparse mode; use run_dense")
    if cmap.lanes != cfg.lanes or cmap.depth != cfg.depth:
        raise ValueError("connectivity map does not match the PE geometry")
    pa, pb, rows = _pad_streams(a, b, cfg.lanes)
    lanes = cfg.lanes
    ev = EventCounters()
    if rows == 0:
        return PERunResult(accumulator=0.0, cycles=0, events=ev)

    buf = StagingBuffer(pa, pb, cfg, ev)
    consumed = 0
    acc = np.float32(0.0)

    while consumed < rows:
        schedule, z_after = sched.schedule_step(buf.z, cmap, levels)
        lane_products = np.zeros(lanes, dtype=np.float32)
        for lane, m in enumerate(schedule.ms):
            if m is sched.IDLE:
                ev.idle_lanes += 1
                continue
            step, src = cmap.options[lane][m]
            av, bv = buf.a[step, src], buf.b[step, src]
            lane_products[lane] = av * bv
            if av != 0 and bv != 0:
                ev.macs_effectual += 1
        acc = acc + np.sum(lane_products, dtype=np.float32)
        ev.macs_issued += lanes
        ev.scheduler_steps += 1
        ev.mux_traversals += 2 * lanes
        ev.staging_reads += 2 * lanes
        ev.cycles += 1

        buf.advance(z_after, schedule.as_count, ev)
        consumed += schedule.as_count

    return PERunResult(accumulator=float(acc), cycles=ev.cycles, events=ev)


def bypass_mode(cfg: PEConfig) -> PEConfig:
    """Power-gate the sparsity machinery: the PE reverts to the dense path."""
    return replace(cfg, mode=PEMode.DENSE)


def decide_bypass(zero_fraction: float, threshold: float = 0.05) -> bool:
    """Per-layer bypass rule driven by the output zero counters.

    Below the threshold the expected cycle win cannot pay for the sparsity
    components, so the staging buffers are bypassed for the next layer.
    """
    return zero_fraction < threshold
