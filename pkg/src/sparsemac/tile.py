"""A grid of PEs sharing B operands along rows and A operands along columns.

Each row has its own scheduler over the shared B-side staging buffer; the
A-side buffers are per column and every PE in a row reuses the row's select
signals. The whole tile shares one window anchor, so each cycle it can only
advance by the smallest per-row drain count: rows with denser streams stall
the rest (work imbalance). Bits a row already consumed stay consumed when
the window advances (residual masks persist), so no pair is issued twice.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import scheduler as sched
from .energy import EventCounters
from .pe import PEConfig, PEMode
from .scheduler import ConnectivityMap, LevelPartition


@dataclass(frozen=True)
class TileConfig:
    rows: int = 4
    cols: int = 4
    pe: PEConfig = field(default_factory=PEConfig)
    tiles_per_chip: int = 16

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1 or self.tiles_per_chip < 1:
            raise ValueError("tile geometry must be positive")

    @property
    def macs_per_cycle(self) -> int:
        return self.rows * self.cols * self.pe.lanes


@dataclass
class TileRunResult:
    result: np.ndarray          # (rows, cols) accumulators
    cycles: int
    dense_cycles: int
    events: EventCounters = field(default_factory=EventCounters)


class RowWindowState:
    """Per-row residual Z over the shared window anchor plus both operand
    value planes. Residual bits are a subset of what each row's B stream
    provides at the current anchor: consumed bits stay cleared when the
    anchor moves, so no pair can be issued twice."""

    def __init__(self, bvals, avals, depth):
        rows, nrows, lanes = bvals.shape
        self.anchor = 0
        self.depth = depth
        self.nrows = nrows
        self.residual = np.zeros((rows, nrows + depth, lanes), dtype=bool)
        self.residual[:, :nrows] = bvals != 0
        self.b = np.zeros((rows, nrows + depth, lanes), dtype=np.float32)
        self.b[:, :nrows] = bvals
        self.a = np.zeros((avals.shape[0], nrows + depth, lanes), dtype=np.float32)
        self.a[:, :nrows] = avals

    def window(self, row):
        return self.residual[row, self.anchor:self.anchor + self.depth]

    def store(self, row, z_after):
        self.residual[row, self.anchor:self.anchor + self.depth] = z_after

    def consistent(self) -> bool:
        return bool(np.all(~self.residual | (self.b != 0)))


def _pad_rows(streams, lanes):
    arrs = [np.asarray(s, dtype=np.float32).ravel() for s in streams]
    length = arrs[0].size
    if any(a.size != length for a in arrs):
        raise ValueError("all streams must have equal length")
    rows = -(-length // lanes) if length else 0
    out = np.zeros((len(arrs), rows, lanes), dtype=np.float32)
    for i, a in enumerate(arrs):
        out[i].ravel()[:a.size] = a
    return out, rows


def tile_run(a_streams, b_streams, cfg: TileConfig,
             cmap: ConnectivityMap | None = None,
             levels: LevelPartition | None = None) -> TileRunResult:
    """Run one tile over per-column A streams and per-row B streams.

    result[r][c] accumulates the dot product of b_streams[r] with
    a_streams[c]. Sparsity is extracted from the B side only (one scheduler
    per row); DENSE mode processes every row of every stream.
    """
    if len(b_streams) != cfg.rows or len(a_streams) != cfg.cols:
        raise ValueError(f"expected {cfg.rows} b streams and {cfg.cols} a streams, "
                         f"got {len(b_streams)} and {len(a_streams)}")
    lanes, depth = cfg.pe.lanes, cfg.pe.depth
    bvals, nrows = _pad_rows(b_streams, lanes)
    avals, arows = _pad_rows(a_streams, lanes)
    if arows != nrows:
        raise ValueError("A and B streams must have equal length")
    ev = EventCounters()
    result = np.zeros((cfg.rows, cfg.cols), dtype=np.float32)

    if cfg.pe.mode is PEMode.DENSE:
        for r in range(nrows):
            result += np.einsum("il,jl->ij", bvals[:, r], avals[:, r]).astype(np.float32)
        ev.cycles = nrows
        ev.macs_issued = nrows * cfg.macs_per_cycle
        both = (bvals[:, None, :, :] != 0) & (avals[None, :, :, :] != 0)
        ev.macs_effectual = int(np.count_nonzero(both))
        return TileRunResult(result=result, cycles=nrows, dense_cycles=nrows, events=ev)

    if cmap is None or levels is None:
        raise ValueError("sparse tile runs need a connectivity map and level partition")
    if cmap.lanes != lanes or cmap.depth != depth:
        raise ValueError("connectivity map does not match the PE geometry")

    state = RowWindowState(bvals, avals, depth)
    cycles = 0
    while state.anchor < nrows:
        advances = []
        for r in range(cfg.rows):
            schedule, z_after = sched.schedule_step(state.window(r), cmap, levels)
            state.store(r, z_after)
            for lane, m in enumerate(schedule.ms):
                if m is sched.IDLE:
                    ev.idle_lanes += cfg.cols
                    continue
                step, src = cmap.options[lane][m]
                b = state.b[r, state.anchor + step, src]
                result[r] += b * state.a[:, state.anchor + step, src]
                if b != 0:
                    ev.macs_effectual += int(
                        np.count_nonzero(state.a[:, state.anchor + step, src]))
            advances.append(schedule.as_count)
            ev.scheduler_steps += 1
        state.anchor += min(advances)
        cycles += 1
        ev.macs_issued += cfg.macs_per_cycle
        ev.mux_traversals += cfg.rows * lanes + cfg.rows * cfg.cols * lanes
        ev.staging_reads += cfg.rows * lanes + cfg.cols * lanes

    ev.cycles = cycles
    ev.staging_writes += (cfg.rows + cfg.cols) * nrows * lanes
    return TileRunResult(result=result, cycles=cycles, dense_cycles=nrows, events=ev)


def coupled_speedup(masks: np.ndarray, cmap: ConnectivityMap,
                    levels: LevelPartition) -> float:
    """Speedup of one row group sharing a window anchor (min-advance).

    ``masks`` is (rows, stream_rows, lanes) of B-side non-zero flags; the
    values themselves do not matter for timing, so dummy ones are used.
    """
    from . import engine

    rows, nrows, lanes = masks.shape
    z = np.zeros((rows, nrows + cmap.depth, lanes), dtype=bool)
    z[:, :nrows] = masks
    ones = np.ones_like(z, dtype=np.float32)
    res = engine.run_batch(z, ones, ones, np.full(rows, nrows),
                           cmap, levels, groups=np.zeros(rows, dtype=np.int64))
    return nrows / int(res.cycles[0])


def rows_scaling_curve(row_counts, sparsity: float, stream_rows: int,
                       cmap: ConnectivityMap, levels: LevelPartition,
                       seeds) -> dict[int, list[float]]:
    """Per-seed coupled speedups for each row count, on nested streams.

    A geometry with more rows sees a superset of the smaller one's streams
    (common random numbers), so per-seed curves are directly comparable.
    """
    max_rows = max(row_counts)
    out: dict[int, list[float]] = {r: [] for r in row_counts}
    for seed in seeds:
        rng = np.random.default_rng(seed)
        masks = rng.random((max_rows, stream_rows, cmap.lanes)) >= sparsity
        for r in row_counts:
            out[r].append(coupled_speedup(masks[:r], cmap, levels))
    return out


def geometry_sweep(row_counts, col_counts, sparsity: float, length: int,
                   cfg: TileConfig, cmap: ConnectivityMap,
                   levels: LevelPartition, seeds, ) -> list[dict]:
    """Average tile speedup over seeds for each (rows, cols) geometry.

    Streams are i.i.d. random at the given B-side sparsity, drawn nested so
    that a geometry with more rows sees a superset of the smaller one's
    streams. Returns one mapping per geometry with rows, cols and speedup.
    Columns share the row schedule, so they shift throughput but not the
    speedup ratio; they are swept for completeness.
    """
    stream_rows = -(-length // cfg.pe.lanes)
    out = []
    for rows in row_counts:
        per_rows = rows_scaling_curve([rows], sparsity, stream_rows,
                                      cmap, levels, seeds)[rows]
        for cols in col_counts:
            out.append({"rows": rows, "cols": cols,
                        "speedup": float(np.mean(per_rows))})
    return out
