"""Scheduled-form tensor storage and the reverse-mux decompressor.

The front-side scheduler doubles as a compression engine: running it over a
group of dense rows with one-side zero bits yields, per step, one row of
(value, movement-index) pairs. Stored that way a tensor occupies one row
per scheduling step instead of one per dense row. Decompression mirrors
the multiplexer stage: each pair is routed back to the dense position its
movement index names, and untouched positions are zero.

PACKED groups keep only the selected entries and need a per-group row
count (the side-table pointer); SLOTTED groups reserve worst-case space so
a group's location stays directly addressable.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import scheduler as sched
from .energy import EventCounters
from .scheduler import ConnectivityMap, LevelPartition


class AllocMode(enum.Enum):
    PACKED = "packed"
    SLOTTED = "slotted"


@dataclass(frozen=True)
class ScheduledGroup:
    """One group of dense rows in scheduled (value, idx) form.

    ``steps[k]`` holds the entries selected in scheduling step k as
    (lane, value, idx) triples; ``anchors[k]`` is the dense row the window
    started at. SLOTTED groups materialize idle lanes as (lane, 0.0, 0).
    """

    lanes: int
    dense_rows: int
    mode: AllocMode
    steps: tuple
    anchors: tuple

    @property
    def compressed_rows(self) -> int:
        return len(self.steps)

    @property
    def entry_count(self) -> int:
        return sum(len(s) for s in self.steps)

    @property
    def size_slots(self) -> int:
        """Storage slots the group occupies (dense-size worst case when SLOTTED)."""
        if self.mode is AllocMode.SLOTTED:
            return self.dense_rows * self.lanes
        return self.entry_count


def compress_group(rows: np.ndarray, cmap: ConnectivityMap,
                   levels: LevelPartition,
                   mode: AllocMode = AllocMode.PACKED) -> ScheduledGroup:
    """Schedule a group of dense rows into (value, idx) form.

    One-side scheduling: the Z bits are simply the non-zero positions of
    the rows themselves. Compressed row count equals the cycle count a PE
    would need for the same stream.
    """
    rows = np.asarray(rows, dtype=np.float32)
    if rows.ndim != 2 or rows.shape[1] != cmap.lanes:
        raise ValueError(f"group rows must be (n, {cmap.lanes}), got {rows.shape}")
    nrows = rows.shape[0]
    depth = cmap.depth
    padded = np.zeros((nrows + depth, cmap.lanes), dtype=np.float32)
    padded[:nrows] = rows
    zfull = padded != 0

    steps = []
    anchors = []
    cur = 0
    while cur < nrows:
        window = zfull[cur:cur + depth]
        schedule, z_after = sched.schedule_step(window, cmap, levels)
        zfull[cur:cur + depth] = z_after
        entries = []
        for lane, m in enumerate(schedule.ms):
            if m is sched.IDLE:
                if mode is AllocMode.SLOTTED:
                    entries.append((lane, np.float32(0.0), 0))
                continue
            step, src = cmap.options[lane][m]
            entries.append((lane, padded[cur + step, src], m))
        steps.append(tuple(entries))
        anchors.append(cur)
        cur += schedule.as_count
    return ScheduledGroup(lanes=cmap.lanes, dense_rows=nrows, mode=mode,
                          steps=tuple(steps), anchors=tuple(anchors))


def decompress_group(g: ScheduledGroup, cmap: ConnectivityMap) -> np.ndarray:
    """Mirror of the multiplexer stage: route every pair to its dense slot."""
    if g.lanes != cmap.lanes:
        raise ValueError("group lane count does not match the map")
    out = np.zeros((g.dense_rows, g.lanes), dtype=np.float32)
    written = np.zeros((g.dense_rows, g.lanes), dtype=bool)
    for anchor, entries in zip(g.anchors, g.steps):
        for lane, value, idx in entries:
            if value == 0.0:
                continue  # SLOTTED idle filler carries no dense position
            if not 0 <= idx < len(cmap.options[lane]):
                raise ValueError(f"movement index {idx} out of range for lane {lane}")
            step, src = cmap.options[lane][idx]
            row = anchor + step
            if row >= g.dense_rows:
                raise ValueError(f"entry routed past the group ({row} >= {g.dense_rows})")
            if written[row, src]:
                raise ValueError(f"two entries map to dense position ({row}, {src})")
            out[row, src] = value
            written[row, src] = True
    return out


def backside_schedule(rows: np.ndarray, cmap: ConnectivityMap,
                      levels: LevelPartition,
                      mode: AllocMode = AllocMode.PACKED,
                      ev: EventCounters | None = None,
                      ) -> tuple[ScheduledGroup, int]:
    """Iterative output-side scheduling: same result, one level per cycle.

    Reusing a single level of the hierarchy makes each scheduling step cost
    ``len(levels)`` cycles (6 for the default map) instead of 1.
    """
    g = compress_group(rows, cmap, levels, mode)
    cycles = g.compressed_rows * len(levels)
    if ev is not None:
        ev.scheduler_steps += g.compressed_rows * len(levels)
        ev.cycles += cycles
    return g, cycles


def compress_ratio(g: ScheduledGroup) -> float:
    """Dense rows over compressed rows; 1 when nothing was skipped."""
    return g.dense_rows / g.compressed_rows if g.compressed_rows else 1.0
