"""Step-by-step walk through one scheduling cycle.

Shows the Z window, the per-level selections, and the drain count for a
hand-made sparsity pattern on the default 16-lane interconnect.
"""

import numpy as np

from sparsemac import (IDLE, combine_z, default_connectivity, level_partition,
                       schedule_step)


def show(z, label):
    print(f"{label}:")
    for d, row in enumerate(z):
        bits = "".join("x" if b else "." for b in row)
        print(f"  step +{d}: {bits}")


def main():
    cmap = default_connectivity(16, 3)
    levels = level_partition(cmap)
    print("lane 8 movement options (priority order):", cmap.options[8])
    print("levels:", levels.groups, "\n")

    rng = np.random.default_rng(3)
    az = rng.random((3, 16)) < 0.8   # the A side has a few zeros
    bz = rng.random((3, 16)) < 0.5   # the B side is half zeros
    z = combine_z(az, bz)
    show(z, "Z = AZ & BZ (effectual pairs)")

    schedule, z_after = schedule_step(z, cmap, levels)
    print("\nper-lane selections (step, source lane):")
    for lane, m in enumerate(schedule.ms):
        if m is IDLE:
            print(f"  lane {lane:2d}: idle")
        else:
            step, src = cmap.options[lane][m]
            kind = ("dense" if (step, src) == (0, lane)
                    else "lookahead" if src == lane else "lookaside")
            print(f"  lane {lane:2d}: option {m} -> (+{step}, lane {src}) [{kind}]")
    show(z_after, "\nZ after selection")
    print(f"\nrows drained this cycle (AS): {schedule.as_count}")


if __name__ == "__main__":
    main()
