"""Command line driver: analyze traces, simulate, sweep, compress.

Reports are CSV with the resolved configuration echoed as comment lines so
every run can be reproduced from its output. Energy columns are accounted
at PE-row granularity: column and tile replication scale dense and sparse
runs by the same factor and cancel in the ratios.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import compress as comp
from . import config as cfgmod
from . import engine
from . import tile as tilemod
from .config import RunConfig
from .energy import EventCounters, tally
from .pe import PEMode, decide_bypass
from .scheduler import ConfigError, default_connectivity, level_partition
from .tensor import (ConvShape, Kind, LayerType, layout_groups,
                     potential_speedup, sparsity_stats)
from .traceio import (RecordKind, SynthSpec, TraceError, TraceFile,
                      TraceRecord, pack_scheduled, read_trace, synth_tensor,
                      write_trace)
from .trainops import LayerSpec, LoweredOp, OpKind, lower_op


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def _write_csv(out_path, echo_lines, columns, rows):
    lines = list(echo_lines)
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in columns))
    text = "\n".join(lines) + "\n"
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _resolve_config(args) -> tuple[RunConfig, dict]:
    settings: dict = {}
    if args.config:
        settings.update(cfgmod.load_config_file(args.config))
    for key in ("trace", "synthetic", "rows", "cols", "lanes", "depth",
                "mode", "op", "side", "dtype", "seed", "out"):
        val = getattr(args, key, None)
        if val is not None:
            settings[key] = val
    cfg = cfgmod.apply_settings(RunConfig(), settings)
    cfg.validate()
    return cfg, settings


def _scheduler_parts(cfg: RunConfig):
    if cfg.connectivity:
        cmap = cfgmod.parse_connectivity(cfg.connectivity, cfg.lanes, cfg.depth)
    else:
        cmap = default_connectivity(cfg.lanes, cfg.depth)
    return cmap, level_partition(cmap)


def _layers_from_config(cfg: RunConfig):
    """Yield (layer id, epoch, LayerSpec, A, W, G_O) from trace or synthetic."""
    if cfg.trace:
        tf = read_trace(cfg.trace)
        by_layer: dict = {}
        for rec in tf.records:
            if rec.kind in (RecordKind.A, RecordKind.W, RecordKind.G):
                by_layer.setdefault((rec.epoch_id, rec.layer_id), {})[rec.kind] = rec
        for (epoch, layer_id), recs in sorted(by_layer.items()):
            if set(recs) != {RecordKind.A, RecordKind.W, RecordKind.G}:
                continue  # incomplete layer capture
            a, w, g = recs[RecordKind.A], recs[RecordKind.W], recs[RecordKind.G]
            kx, ky = w.tensor.dims[2], w.tensor.dims[3]
            fc = (kx, ky) == a.tensor.dims[2:]
            shape = ConvShape(stride=max(1, a.stride), kernel=(kx, ky),
                              in_channels=a.tensor.dims[1],
                              out_dims=g.tensor.dims[2:],
                              layer_type=LayerType.FC if fc else LayerType.CONV)
            spec = LayerSpec(layer_id=layer_id, shape=shape, a_dims=a.tensor.dims,
                             w_dims=w.tensor.dims, g_dims=g.tensor.dims)
            yield layer_id, epoch, spec, a.tensor, w.tensor, g.tensor
    else:
        sc = cfg.synth or cfgmod.SynthConfig()
        n, c, h, w = sc.dims
        k, st = sc.kernel, sc.stride
        nox = (h - k) // st + 1
        noy = (w - k) // st + 1
        shape = ConvShape(stride=st, kernel=(k, k), in_channels=c,
                          out_dims=(nox, noy))
        spec = LayerSpec(layer_id=0, shape=shape, a_dims=(n, c, h, w),
                         w_dims=(sc.filters, c, k, k),
                         g_dims=(n, sc.filters, nox, noy))
        a = synth_tensor(SynthSpec(dims=(n, c, h, w), sparsity=sc.sparsity,
                                   seed=cfg.seed), kind=Kind.A)
        wt = synth_tensor(SynthSpec(dims=(sc.filters, c, k, k), sparsity=0.0,
                                    seed=cfg.seed + 1), kind=Kind.W)
        g = synth_tensor(SynthSpec(dims=(n, sc.filters, nox, noy),
                                   sparsity=sc.sparsity, seed=cfg.seed + 2),
                         kind=Kind.G)
        yield 0, 0, spec, a, wt, g


def _simulate_lowered(lo: LoweredOp, cfg: RunConfig, cmap, levels) -> dict:
    """Chip cycles plus PE-row-level event counters for one lowered op."""
    lanes, depth = cfg.lanes, cfg.depth
    NB = lo.b_matrix.shape[0]
    NA = lo.a_matrix.shape[0]
    stream_rows = -(-lo.b_matrix.shape[1] // lanes)
    col_passes = -(-NA // cfg.cols)

    chunk_of = np.arange(NB) // cfg.rows
    nchunks = int(chunk_of.max()) + 1
    dense_chip = _chip_cycles(np.full(nchunks, stream_rows), cfg.tiles) * col_passes

    if cfg.mode is PEMode.DENSE:
        dense_ev = EventCounters(macs_issued=NB * stream_rows * lanes,
                                 cycles=NB * stream_rows)
        return {"dense_cycles": dense_chip, "sparse_cycles": dense_chip,
                "dense_ev": dense_ev, "sparse_ev": dense_ev,
                "stream_rows": stream_rows}

    if cfg.mode is PEMode.SPARSE_BOTH:
        # both-side extraction needs a scheduler per PE: one window per pair
        bmat = lo.b_matrix[lo.pair_index[:, 0]]
        amat = lo.a_matrix[lo.pair_index[:, 1]]
        NW = bmat.shape[0]
        chunk_of = np.arange(NW) // (cfg.rows * cfg.cols)
        nchunks = int(chunk_of.max()) + 1
        col_passes = 1
        dense_chip = _chip_cycles(np.full(nchunks, stream_rows), cfg.tiles)
    else:
        bmat = lo.b_matrix
        amat = None
        NW = NB
    pad_len = (stream_rows + depth) * lanes
    bpad = np.zeros((NW, pad_len), dtype=np.float32)
    bpad[:, :bmat.shape[1]] = bmat
    bpad = bpad.reshape(NW, stream_rows + depth, lanes)
    z = bpad != 0
    if amat is not None:
        apad = np.zeros((NW, pad_len), dtype=np.float32)
        apad[:, :amat.shape[1]] = amat
        z &= apad.reshape(NW, stream_rows + depth, lanes) != 0
    ones = np.ones_like(bpad)
    res = engine.run_batch(z, ones, bpad, np.full(NW, stream_rows, dtype=np.int64),
                           cmap, levels, groups=chunk_of)
    chunk_cycles = np.zeros(nchunks, dtype=np.int64)
    np.maximum.at(chunk_cycles, chunk_of, res.cycles)
    sparse_chip = _chip_cycles(chunk_cycles, cfg.tiles) * col_passes

    dense_ev = EventCounters(macs_issued=NW * stream_rows * lanes,
                             cycles=NW * stream_rows)
    sparse_ev = EventCounters(
        macs_issued=res.window_steps * lanes,
        scheduler_steps=res.window_steps,
        mux_traversals=2 * lanes * res.window_steps,
        staging_reads=2 * lanes * res.window_steps,
        staging_writes=2 * lanes * NW * stream_rows,
        cycles=res.window_steps)
    return {"dense_cycles": int(dense_chip), "sparse_cycles": int(sparse_chip),
            "dense_ev": dense_ev, "sparse_ev": sparse_ev,
            "stream_rows": stream_rows}


def _chip_cycles(chunk_cycles: np.ndarray, tiles: int) -> int:
    per_tile = np.zeros(tiles, dtype=np.int64)
    for i, c in enumerate(chunk_cycles):
        per_tile[i % tiles] += c
    return int(per_tile.max())


def _effectual_fraction(lo: LoweredOp, issued_rows: int, lanes: int) -> float:
    nb = (lo.b_matrix != 0).astype(np.int64)
    na = (lo.a_matrix != 0).astype(np.int64)
    per_pair = nb @ na.T
    eff = int(per_pair[lo.pair_index[:, 0], lo.pair_index[:, 1]].sum())
    total = lo.pair_index.shape[0] * issued_rows * lanes
    return eff / total if total else 0.0


SIMULATE_COLUMNS = ["epoch", "layer", "op", "side", "dense_cycles",
                    "sparse_cycles", "speedup", "effectual_fraction",
                    "energy_dense", "energy_sparse", "energy_eff", "bypass"]


def run_experiment(cfg: RunConfig, settings: dict | None = None) -> list[dict]:
    """One report row per (layer, op): cycles, speedup, energy, bypass."""
    cfg.validate()
    cmap, levels = _scheduler_parts(cfg)
    ctable = cfgmod.cost_table_from_settings(settings or {}, cfg.lanes)
    rows_out = []
    for layer_id, epoch, spec, a, w, g in _layers_from_config(cfg):
        for op in cfg.ops:
            lo = lower_op(op, spec, a, w, g, cfg.side)
            sched_tensor = {"A": a, "G": g, "W": w}[lo.side]
            frac = sparsity_stats(sched_tensor).fraction
            bypass = (cfg.mode is not PEMode.DENSE
                      and decide_bypass(frac, cfg.bypass_threshold))
            run_cfg = cfg if not bypass else cfgmod.replace(cfg, mode=PEMode.DENSE)
            sim = _simulate_lowered(lo, run_cfg, cmap, levels)
            e_dense = tally(sim["dense_ev"], ctable, cfg.dtype, sparse_enabled=False)
            e_sparse = tally(sim["sparse_ev"], ctable, cfg.dtype,
                             sparse_enabled=not (bypass or cfg.mode is PEMode.DENSE))
            rows_out.append({
                "epoch": epoch, "layer": layer_id, "op": op.value,
                "side": lo.side,
                "dense_cycles": sim["dense_cycles"],
                "sparse_cycles": sim["sparse_cycles"],
                "speedup": sim["dense_cycles"] / sim["sparse_cycles"],
                "effectual_fraction": _effectual_fraction(
                    lo, sim["stream_rows"], cfg.lanes),
                "energy_dense": e_dense, "energy_sparse": e_sparse,
                "energy_eff": e_dense / e_sparse,
                "bypass": int(bypass),
            })
    return rows_out


def cmd_simulate(args) -> int:
    cfg, settings = _resolve_config(args)
    rows_out = run_experiment(cfg, settings)
    _write_csv(cfg.out, cfg.echo_lines(), SIMULATE_COLUMNS, rows_out)
    return 0


def cmd_analyze(args) -> int:
    cfg, _ = _resolve_config(args)
    if not cfg.trace:
        raise ValueError("analyze needs --trace")
    tf = read_trace(cfg.trace)
    rows_out = []
    for rec in tf.records:
        if rec.tensor is None:
            continue
        st = sparsity_stats(rec.tensor)
        rows_out.append({
            "name": rec.name, "kind": rec.kind.name, "layer": rec.layer_id,
            "epoch": rec.epoch_id,
            "dims": "x".join(map(str, rec.dims)),
            "total": st.total, "zeros": st.zeros, "fraction": st.fraction,
            "potential_speedup": potential_speedup(st),
        })
    cols = ["name", "kind", "layer", "epoch", "dims", "total", "zeros",
            "fraction", "potential_speedup"]
    _write_csv(cfg.out, cfg.echo_lines(), cols, rows_out)
    return 0


def _parse_values(text: str):
    if ":" in text:
        lo, hi, step = (float(x) for x in text.split(":"))
        n = int(round((hi - lo) / step)) + 1
        return [round(lo + i * step, 10) for i in range(n)]
    return [float(x) for x in text.split(",")]


def cmd_sweep(args) -> int:
    cfg, settings = _resolve_config(args)
    cmap, levels = _scheduler_parts(cfg)
    values = _parse_values(args.values)
    rows_out = []
    if args.sweep == "sparsity":
        base = cfg.synth or cfgmod.SynthConfig()
        for s in values:
            scfg = cfgmod.replace(cfg, synth=cfgmod.replace(base, sparsity=s))
            _, _, spec, a, w, g = next(iter(_layers_from_config(scfg)))
            lo = lower_op(OpKind.FWD, spec, a, w, g, cfg.side)
            sim = _simulate_lowered(lo, scfg, cmap, levels)
            rows_out.append({
                "sparsity": s, "dense_cycles": sim["dense_cycles"],
                "sparse_cycles": sim["sparse_cycles"],
                "speedup": sim["dense_cycles"] / sim["sparse_cycles"]})
        cols = ["sparsity", "dense_cycles", "sparse_cycles", "speedup"]
    elif args.sweep in ("rows", "cols"):
        counts = [int(v) for v in values]
        base = cfg.synth or cfgmod.SynthConfig()
        stream_rows = -(-base.dims[1] * base.kernel ** 2 // cfg.lanes)
        seeds = [cfg.seed + i for i in range(8)]
        if args.sweep == "rows":
            curve = tilemod.rows_scaling_curve(counts, base.sparsity,
                                               max(stream_rows, 32), cmap,
                                               levels, seeds)
            for r in counts:
                rows_out.append({"rows": r, "cols": cfg.cols,
                                 "speedup": float(np.mean(curve[r]))})
        else:
            curve = tilemod.rows_scaling_curve([cfg.rows], base.sparsity,
                                               max(stream_rows, 32), cmap,
                                               levels, seeds)
            for c in counts:
                rows_out.append({"rows": cfg.rows, "cols": int(c),
                                 "speedup": float(np.mean(curve[cfg.rows]))})
        cols = ["rows", "cols", "speedup"]
    else:
        raise ValueError(f"unknown sweep kind {args.sweep!r}")
    _write_csv(cfg.out, cfg.echo_lines(), cols, rows_out)
    return 0


def cmd_compress(args) -> int:
    cfg, _ = _resolve_config(args)
    cmap, levels = _scheduler_parts(cfg)
    rows_out = []
    sched_records = []
    for layer_id, epoch, spec, a, w, g in _layers_from_config(cfg):
        for name, t in (("A", a), ("W", w), ("G", g)):
            layout = layout_groups(t)
            packed = [comp.compress_group(grp, cmap, levels, comp.AllocMode.PACKED)
                      for grp in layout.groups]
            dense_rows = sum(gr.dense_rows for gr in packed)
            sched_rows = sum(gr.compressed_rows for gr in packed)
            entries = sum(gr.entry_count for gr in packed)
            rows_out.append({
                "layer": layer_id, "tensor": name, "groups": len(packed),
                "dense_rows": dense_rows, "sched_rows": sched_rows,
                "ratio": dense_rows / sched_rows if sched_rows else 1.0,
                "packed_entries": entries,
                "slotted_slots": dense_rows * cmap.lanes})
            sched_records.append(TraceRecord(
                name=f"L{layer_id}.{name}.sched", kind=RecordKind.SCHEDULED,
                dtype=t.dtype, layer_id=layer_id, epoch_id=epoch,
                stride=spec.shape.stride, kernel=spec.shape.kernel,
                dims=t.dims, scheduled=pack_scheduled(packed)))
    cols = ["layer", "tensor", "groups", "dense_rows", "sched_rows", "ratio",
            "packed_entries", "slotted_slots"]
    if cfg.out:
        write_trace(cfg.out, TraceFile(records=sched_records))
        _write_csv(None, cfg.echo_lines(), cols, rows_out)
    else:
        _write_csv(None, cfg.echo_lines(), cols, rows_out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="sparsemac",
        description="Simulate a sparsity-skipping MAC accelerator for DNN training")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="key = value configuration file")
        sp.add_argument("--trace", help="TDTR trace file to simulate")
        sp.add_argument("--synthetic",
                        help="synthetic input, e.g. s=0.5,dims=1,128,8,8,f=16,k=3,stride=1")
        sp.add_argument("--rows", type=int)
        sp.add_argument("--cols", type=int)
        sp.add_argument("--lanes", type=int)
        sp.add_argument("--depth", type=int)
        sp.add_argument("--mode", choices=["dense", "sparse_b", "sparse_both"])
        sp.add_argument("--op", choices=["fwd", "igrad", "wgrad", "all"])
        sp.add_argument("--side", choices=["auto", "a", "b", "both"])
        sp.add_argument("--dtype", choices=["f32", "bf16"])
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="CSV output path (stdout if omitted)")

    common(sub.add_parser("analyze", help="sparsity census of a trace"))
    common(sub.add_parser("simulate", help="dense vs sparse cycles and energy"))
    sw = sub.add_parser("sweep", help="sweep sparsity or tile geometry")
    common(sw)
    sw.add_argument("--sweep", choices=["sparsity", "rows", "cols"],
                    default="sparsity")
    sw.add_argument("--values", default="0.1:0.9:0.1")
    common(sub.add_parser("compress", help="scheduled-form compression stats"))
    return p


_COMMANDS = {"analyze": cmd_analyze, "simulate": cmd_simulate,
             "sweep": cmd_sweep, "compress": cmd_compress}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (TraceError, ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
