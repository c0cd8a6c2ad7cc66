"""Energy accounting: the 1.02x power calibration and what it buys.

The default cost table makes a fully-utilized sparse datapath draw 2% more
power than the dense baseline (5% for BF16), so compute-only energy
efficiency is speedup divided by that ratio; running dense work through
the sparse datapath costs about 2% unless it is bypassed.
"""

import numpy as np

from sparsemac import (DType, PEConfig, PEMode, decide_bypass,
                       default_connectivity, default_cost_table, efficiency,
                       level_partition, run_dense, run_sparse, tally)

CMAP = default_connectivity(16, 3)
LEVELS = level_partition(CMAP)


def one_point(sparsity, rng, table, dtype=DType.F32):
    n = 16 * 2048
    a = rng.integers(1, 8, n).astype(np.float32)
    b = rng.integers(1, 8, n).astype(np.float32)
    b[rng.random(n) < sparsity] = 0.0
    dense = run_dense(a, b, PEConfig())
    sparse = run_sparse(a, b, PEConfig(mode=PEMode.SPARSE_B), CMAP, LEVELS)
    e_dense = tally(dense.events, table, dtype, sparse_enabled=False)
    e_sparse = tally(sparse.events, table, dtype)
    return efficiency((dense.cycles, e_dense), (sparse.cycles, e_sparse))


def main():
    table = default_cost_table()
    rng = np.random.default_rng(12)
    print(f"{'sparsity':>9} {'speedup':>8} {'energy eff':>11} {'speedup/1.02':>13}")
    for s in (0.0, 0.05, 0.3, 0.6, 0.9):
        speedup, eff = one_point(s, rng, table)
        print(f"{s:>9.2f} {speedup:>8.3f} {eff:>11.3f} {speedup / 1.02:>13.3f}")
    print(f"\nbypass rule at threshold 0.05: "
          f"fraction 0.01 -> {decide_bypass(0.01)}, "
          f"fraction 0.30 -> {decide_bypass(0.30)}")
    speedup, eff = one_point(0.6, rng, table, DType.BF16)
    print(f"BF16 at 60% sparsity: speedup {speedup:.3f}, eff {eff:.3f} "
          f"(ratio 1.05 calibration)")


if __name__ == "__main__":
    main()
