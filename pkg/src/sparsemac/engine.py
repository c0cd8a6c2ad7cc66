"""Vectorized batch runner for staging-window simulations.

Simulates many independent staging windows at once with numpy, mirroring
``scheduler.schedule_step`` semantics exactly (tests cross-check the two).
A window is one scheduled operand stream: its Z mask, its scheduled-side
values ``bv`` and one or more passenger streams ``av`` that move in tandem
(several per window when PE columns share a schedule). Windows may share a
cursor group, in which case the group advances by the minimum drain of its
members each cycle, which is how tile rows synchronize.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scheduler import ConnectivityMap, LevelPartition


@dataclass
class BatchResult:
    cycles: np.ndarray          # (B,) cycles of each window's cursor group
    acc: np.ndarray             # (B, S) accumulators, float32
    rows_total: np.ndarray      # (B,) dense row counts (dense-cycle baseline)
    sel_total: np.ndarray       # (B,) non-idle selections issued
    sel_b_nonzero: np.ndarray   # (B,) selections whose scheduled-side value != 0
    sel_effectual: np.ndarray   # (B,) selections with both operands != 0 (S == 1)
    window_steps: int           # total scheduler invocations across the batch


def pack_streams(a_streams, b_streams, lanes: int, depth: int):
    """Pad value streams into (B, R, L) arrays plus per-window row counts.

    Streams are zero-padded to a whole number of rows; every window gets
    ``depth`` extra all-zero rows so window gathers never go out of bounds.
    """
    if len(a_streams) != len(b_streams):
        raise ValueError("need one a stream per b stream")
    rows_total = np.array([-(-len(b) // lanes) for b in b_streams], dtype=np.int64)
    R = int(rows_total.max(initial=0)) + depth
    B = len(b_streams)
    av = np.zeros((B, R, lanes), dtype=np.float32)
    bv = np.zeros((B, R, lanes), dtype=np.float32)
    for i, (a, b) in enumerate(zip(a_streams, b_streams)):
        a = np.asarray(a, dtype=np.float32).ravel()
        b = np.asarray(b, dtype=np.float32).ravel()
        if a.shape != b.shape:
            raise ValueError(f"stream {i}: length mismatch {a.size} vs {b.size}")
        av[i].ravel()[:a.size] = a
        bv[i].ravel()[:b.size] = b
    return av, bv, rows_total


def run_batch(zmask: np.ndarray, av: np.ndarray, bv: np.ndarray,
              rows_total: np.ndarray, cmap: ConnectivityMap,
              levels: LevelPartition, groups: np.ndarray | None = None,
              ) -> BatchResult:
    """Run every window to completion and return per-window results.

    ``zmask`` is (B, R, L) and is consumed in place. ``av`` may be
    (B, R, L) or (B, S, R, L) for S passenger streams per window.
    ``groups`` maps windows to cursor groups; windows of one group must
    have equal ``rows_total``. Default: every window its own group.
    """
    depth, L = cmap.depth, cmap.lanes
    B, R, Lz = zmask.shape
    if Lz != L:
        raise ValueError(f"window lanes {Lz} do not match map lanes {L}")
    if av.ndim == 3:
        av4 = av[:, None, :, :]
    else:
        av4 = av
    S = av4.shape[1]
    if groups is None:
        groups = np.arange(B)
    groups = np.asarray(groups)
    G = int(groups.max()) + 1 if B else 0

    rows_g = np.zeros(G, dtype=np.int64)
    np.maximum.at(rows_g, groups, rows_total)
    if not np.all(rows_total == rows_g[groups]):
        raise ValueError("windows sharing a cursor group must have equal row counts")
    if R < int(rows_g.max(initial=0)) + depth:
        raise ValueError("window arrays need depth rows of padding beyond the stream")

    # flatten per-lane option tables once
    opt_steps = [np.array([s for s, _ in cmap.options[i]]) for i in range(L)]
    opt_lanes = [np.array([l for _, l in cmap.options[i]]) for i in range(L)]

    cursor_g = np.zeros(G, dtype=np.int64)
    cycles_g = np.zeros(G, dtype=np.int64)
    acc = np.zeros((B, S), dtype=np.float32)
    sel_total = np.zeros(B, dtype=np.int64)
    sel_b_nonzero = np.zeros(B, dtype=np.int64)
    sel_effectual = np.zeros(B, dtype=np.int64)
    window_steps = 0
    win_of = np.arange(B)

    while True:
        act_g = cursor_g < rows_g
        if not act_g.any():
            break
        idx = win_of[act_g[groups]]
        cur = cursor_g[groups[idx]]
        window_steps += idx.size

        for group in levels:
            for lane in group:
                ost, oln = opt_steps[lane], opt_lanes[lane]
                cand = zmask[idx[:, None], cur[:, None] + ost[None, :], oln[None, :]]
                pick = np.argmax(cand, axis=1)
                has = cand[np.arange(idx.size), pick]
                if not has.any():
                    continue
                sub = idx[has]
                rows = cur[has] + ost[pick[has]]
                lns = oln[pick[has]]
                zmask[sub, rows, lns] = False
                bvals = bv[sub, rows, lns]
                avals = av4[sub, :, rows, lns]
                acc[sub] += avals * bvals[:, None]
                sel_total[sub] += 1
                bnz = bvals != 0
                sel_b_nonzero[sub] += bnz
                if S == 1:
                    sel_effectual[sub] += bnz & (avals[:, 0] != 0)

        rowany = np.stack(
            [zmask[idx, cur + d, :].any(axis=1) for d in range(depth)], axis=1)
        nonempty = rowany.any(axis=1)
        as_w = np.where(nonempty, np.argmax(rowany, axis=1), depth)

        k_g = np.full(G, depth, dtype=np.int64)
        np.minimum.at(k_g, groups[idx], as_w)
        cursor_g[act_g] += k_g[act_g]
        cycles_g[act_g] += 1

    return BatchResult(
        cycles=cycles_g[groups] if B else np.zeros(0, dtype=np.int64),
        acc=acc if av.ndim == 4 else acc[:, 0],
        rows_total=rows_total.copy(),
        sel_total=sel_total,
        sel_b_nonzero=sel_b_nonzero,
        sel_effectual=sel_effectual,
        window_steps=window_steps,
    )
