"""Cycle-level model of a sparsity-skipping data-parallel MAC accelerator.

The package models a training accelerator whose processing elements skip
zero operands with a small staging buffer, a sparse interconnect and a
combinational scheduler. It provides the scheduler golden model, PE and
tile simulators, the training convolutions and their lowering, scheduled
form compression, energy accounting, a binary trace container with
synthetic tensor generation, and a command line driver.
"""

__version__ = "0.1.0"

from .tensor import (  # noqa: F401
    GROUP, ConvShape, DType, GroupId, GroupLayout, Kind, LayerType,
    SparsityStats, Tensor4, bf16_value, layout_groups, locate,
    potential_speedup, sparsity_stats, to_bf16, transpose16, ungroup,
    zero_mask,
)
from .scheduler import (  # noqa: F401
    IDLE, ConfigError, ConnectivityMap, LevelPartition, Schedule,
    advance_window, combine_z, connectivity_from_pattern,
    default_connectivity, level_partition, make_z, schedule_step,
    z_from_values,
)
from .pe import (  # noqa: F401
    PEConfig, PEMode, PERunResult, bypass_mode, decide_bypass, run_dense,
    run_sparse,
)
from .energy import (  # noqa: F401
    CostTable, EventCosts, EventCounters, default_cost_table, efficiency,
    tally,
)
from .tile import TileConfig, TileRunResult, geometry_sweep, tile_run  # noqa: F401
from .trainops import (  # noqa: F401
    LayerSpec, OpKind, SidePolicy, TrainHyper, WorkUnit, dilate, forward_conv,
    input_grad_conv, lower_to_tile, reconstruct_rotated_filters,
    weight_grad_conv, weight_update,
)
from .compress import (  # noqa: F401
    AllocMode, ScheduledGroup, backside_schedule, compress_group,
    decompress_group,
)
from .traceio import (  # noqa: F401
    SynthPattern, SynthSpec, TraceFile, TraceRecord, read_trace, synth_tensor,
    write_trace,
)
