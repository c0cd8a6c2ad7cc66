"""Golden model of the combinational sparse-operand scheduler.

A staging window holds ``depth`` rows of ``lanes`` operand pairs. The Z
matrix marks which positions still hold an effectual pair. Every cycle the
scheduler picks, per lane, one movement out of a small static option list
(the sparse interconnect), never picking the same position twice, and
reports how many leading window rows it fully drained so they can be
refilled.

Selection is hierarchical: lanes are partitioned into levels whose option
sets cannot overlap, each level picks greedily by static priority, and the
picked bits are removed from Z before the next level runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

IDLE = None  # ms value for a lane that found no available option


class ConfigError(ValueError):
    """Raised for unsupported or inconsistent scheduler configurations."""


@dataclass(frozen=True)
class ConnectivityMap:
    """Per-lane movement options of the sparse interconnect.

    ``options[i]`` is the ordered tuple of (step, lane) positions lane i
    may read, highest priority first. Option 0 is always (0, i), the dense
    position. Maps are rotation invariant: lane i's list is lane 0's list
    with all lanes shifted by i modulo ``lanes``.
    """

    lanes: int
    depth: int
    options: tuple[tuple[tuple[int, int], ...], ...]

    def __post_init__(self):
        if len(self.options) != self.lanes:
            raise ConfigError("option table must cover every lane")
        for i, opts in enumerate(self.options):
            if opts[0] != (0, i):
                raise ConfigError(f"lane {i}: option 0 must be the dense position (0, {i})")
            if len(set(opts)) != len(opts):
                raise ConfigError(f"lane {i}: duplicate options")
            for step, lane in opts:
                if not (0 <= step < self.depth and 0 <= lane < self.lanes):
                    raise ConfigError(f"lane {i}: option ({step}, {lane}) out of range")


# Lane-0 option pattern of the default interconnect, highest priority
# first: dense slot, lookahead 1 and 2, then lookaside to neighbours.
_DEFAULT_PATTERN = (
    (0, 0), (1, 0), (2, 0),
    (1, -1), (1, +1), (2, -2), (2, +2), (1, -3),
)


def default_connectivity(lanes: int = 16, depth: int = 3) -> ConnectivityMap:
    """The default ring interconnect: 2 lookahead + 5 lookaside options.

    ``depth`` 2 drops the step-2 options (5 movements per lane). Lane
    arithmetic wraps around the ring; wraparound collisions keep the
    highest-priority occurrence only.
    """
    if depth not in (2, 3):
        raise ConfigError(f"unsupported staging depth {depth} (expected 2 or 3)")
    if lanes < 4:
        raise ConfigError(f"need at least 4 lanes, got {lanes}")
    pattern = [(s, d) for s, d in _DEFAULT_PATTERN if s < depth]
    return connectivity_from_pattern(pattern, lanes, depth)


def connectivity_from_pattern(pattern, lanes: int, depth: int) -> ConnectivityMap:
    """Build a rotation-invariant map from a lane-0 (step, lane-offset) list."""
    table = []
    for i in range(lanes):
        opts = []
        for step, delta in pattern:
            pos = (step, (i + delta) % lanes)
            if pos not in opts:
                opts.append(pos)
        table.append(tuple(opts))
    return ConnectivityMap(lanes=lanes, depth=depth, options=tuple(table))


@dataclass(frozen=True)
class LevelPartition:
    """Ordered lane groups scheduled together; option sets disjoint per group."""

    groups: tuple[tuple[int, ...], ...]

    def __iter__(self):
        return iter(self.groups)

    def __len__(self):
        return len(self.groups)


def level_partition(cmap: ConnectivityMap) -> LevelPartition:
    """Partition lanes into levels whose in-level option sets cannot overlap.

    Lanes a stride of 5 apart have disjoint option sets under the default
    interconnect; for 16 lanes this yields the canonical six levels
    {0,5,10} {1,6,11} {2,7,12} {3,8,13} {4,9,14} {15}.
    """
    lanes = cmap.lanes
    groups: list[list[int]] = []
    placed = [False] * lanes
    for start in range(lanes):
        if placed[start]:
            continue
        group = [start]
        placed[start] = True
        lane = start + 5
        while lane < lanes:
            if not placed[lane] and all(_disjoint(cmap, lane, g) for g in group):
                group.append(lane)
                placed[lane] = True
            lane += 5
        groups.append(group)
    part = LevelPartition(groups=tuple(tuple(g) for g in groups))
    verify_partition(cmap, part)
    return part


def _disjoint(cmap: ConnectivityMap, a: int, b: int) -> bool:
    return not (set(cmap.options[a]) & set(cmap.options[b]))


def verify_partition(cmap: ConnectivityMap, part: LevelPartition) -> None:
    """Check coverage and in-group disjointness; raise ConfigError if invalid."""
    seen: list[int] = []
    for group in part:
        for a in group:
            for b in group:
                if a != b and not _disjoint(cmap, a, b):
                    raise ConfigError(f"lanes {a} and {b} share options within one level")
        seen.extend(group)
    if sorted(seen) != list(range(cmap.lanes)):
        raise ConfigError("level partition must cover every lane exactly once")


@dataclass(frozen=True)
class Schedule:
    """One cycle's selection: per-lane option index (or IDLE) plus rows drained."""

    ms: tuple
    as_count: int

    def positions(self, cmap: ConnectivityMap):
        """Selected (step, lane) positions, skipping idle lanes."""
        return [cmap.options[i][m] for i, m in enumerate(self.ms) if m is not IDLE]


def make_z(depth: int, lanes: int, rows=None) -> np.ndarray:
    """A depth x lanes Z matrix, optionally from per-row non-zero flags."""
    z = np.zeros((depth, lanes), dtype=bool)
    if rows is not None:
        for s, row in enumerate(rows):
            z[s] = np.asarray(row, dtype=bool)
    return z


def z_from_values(rows: np.ndarray) -> np.ndarray:
    """Z bits for a window of values: set where the value is non-zero."""
    return np.asarray(rows, dtype=np.float32) != 0.0


def combine_z(az: np.ndarray, bz: np.ndarray) -> np.ndarray:
    """AND the two operand-side Z matrices: a pair is effectual iff both are."""
    az = np.asarray(az, dtype=bool)
    bz = np.asarray(bz, dtype=bool)
    if az.shape != bz.shape:
        raise ValueError(f"Z shape mismatch: {az.shape} vs {bz.shape}")
    return az & bz


def schedule_step(z: np.ndarray, cmap: ConnectivityMap,
                  levels: LevelPartition) -> tuple[Schedule, np.ndarray]:
    """One combinational scheduling step.

    Level by level, each lane takes the first of its options whose Z bit is
    still set (static priority) and the bit is cleared before later levels
    run. ``as_count`` is the number of leading all-zero rows of the
    post-selection Z, capped at the window depth.
    """
    z = np.asarray(z, dtype=bool)
    if z.shape != (cmap.depth, cmap.lanes):
        raise ValueError(f"Z shape {z.shape} does not match map "
                         f"({cmap.depth}, {cmap.lanes})")
    z_after = z.copy()
    ms: list = [IDLE] * cmap.lanes
    for group in levels:
        picks = []
        for lane in group:
            for k, (step, src) in enumerate(cmap.options[lane]):
                if z_after[step, src]:
                    ms[lane] = k
                    picks.append((step, src))
                    break
        for step, src in picks:
            z_after[step, src] = False
    as_count = 0
    for step in range(cmap.depth):
        if z_after[step].any():
            break
        as_count += 1
    return Schedule(ms=tuple(ms), as_count=as_count), z_after


def advance_window(z: np.ndarray, fresh_rows, k: int) -> np.ndarray:
    """Shift the window up by ``k`` drained rows and append ``k`` fresh masks."""
    z = np.asarray(z, dtype=bool)
    depth = z.shape[0]
    if not 0 <= k <= depth:
        raise ValueError(f"advance count {k} out of range [0, {depth}]")
    fresh = [np.asarray(r, dtype=bool) for r in fresh_rows]
    if len(fresh) != k:
        raise ValueError(f"expected {k} fresh rows, got {len(fresh)}")
    if k == 0:
        return z.copy()
    out = np.zeros_like(z)
    out[:depth - k] = z[k:]
    for i, row in enumerate(fresh):
        out[depth - k + i] = row
    return out
