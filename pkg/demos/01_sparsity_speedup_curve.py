"""Speedup vs operand sparsity for a 128-channel conv layer.

A 16-lane PE with a 3-deep staging buffer can at best finish 3 rows per
cycle, so the curve tracks 1/(1-s) at low sparsity and saturates near 3x.
A 2-deep buffer saturates at 2x.
"""

import numpy as np

from sparsemac import ConvShape, Kind, default_connectivity, level_partition
from sparsemac import engine
from sparsemac.traceio import SynthSpec, synth_tensor
from sparsemac.trainops import LayerSpec, OpKind, lower_op


def speedup_at(sparsity, depth, seed=0):
    cmap = default_connectivity(16, depth)
    levels = level_partition(cmap)
    shape = ConvShape(stride=1, kernel=(3, 3), in_channels=128, out_dims=(4, 4))
    layer = LayerSpec(layer_id=0, shape=shape, a_dims=(1, 128, 6, 6),
                      w_dims=(16, 128, 3, 3), g_dims=(1, 16, 4, 4))
    a = synth_tensor(SynthSpec(dims=layer.a_dims, sparsity=sparsity, seed=seed))
    w = synth_tensor(SynthSpec(dims=layer.w_dims, sparsity=0.0, seed=seed + 1),
                     Kind.W)
    g = synth_tensor(SynthSpec(dims=layer.g_dims, sparsity=sparsity, seed=seed + 2),
                     Kind.G)
    lo = lower_op(OpKind.FWD, layer, a, w, g)
    rows = -(-lo.b_matrix.shape[1] // 16)
    bpad = np.zeros((lo.b_matrix.shape[0], (rows + depth) * 16), dtype=np.float32)
    bpad[:, :lo.b_matrix.shape[1]] = lo.b_matrix
    bpad = bpad.reshape(-1, rows + depth, 16)
    res = engine.run_batch(bpad != 0, np.ones_like(bpad), bpad,
                           np.full(bpad.shape[0], rows, dtype=np.int64),
                           cmap, levels)
    return bpad.shape[0] * rows / res.cycles.sum()


def main():
    print(f"{'sparsity':>9} {'ideal':>7} {'depth=3':>8} {'depth=2':>8}")
    for s in [round(0.1 * i, 1) for i in range(1, 10)]:
        d3 = np.mean([speedup_at(s, 3, seed) for seed in range(5)])
        d2 = np.mean([speedup_at(s, 2, seed) for seed in range(5)])
        ideal = min(1.0 / (1.0 - s), 3.0)
        print(f"{s:>9.1f} {ideal:>7.2f} {d3:>8.2f} {d2:>8.2f}")


if __name__ == "__main__":
    main()
