"""Run configuration: defaults, plain-text config files, flag overrides.

Config files are ``key = value`` lines with ``#`` comments. Every report
echoes the resolved configuration so runs can be reproduced from their
output alone.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

from .energy import CostTable, EventCosts, default_cost_table
from .pe import PEMode
from .scheduler import ConnectivityMap, connectivity_from_pattern
from .tensor import DType
from .trainops import OpKind, SidePolicy

_MODES = {m.value: m for m in PEMode}
_DTYPES = {"f32": DType.F32, "bf16": DType.BF16}
_OPS = {"fwd": [OpKind.FWD], "igrad": [OpKind.IGRAD], "wgrad": [OpKind.WGRAD],
        "all": [OpKind.FWD, OpKind.IGRAD, OpKind.WGRAD]}
_SIDES = {p.value: p for p in SidePolicy}


@dataclass(frozen=True)
class SynthConfig:
    sparsity: float = 0.5
    dims: tuple[int, int, int, int] = (1, 128, 8, 8)
    filters: int = 16
    kernel: int = 3
    stride: int = 1


@dataclass(frozen=True)
class RunConfig:
    rows: int = 4
    cols: int = 4
    lanes: int = 16
    depth: int = 3
    tiles: int = 16
    mode: PEMode = PEMode.SPARSE_B
    dtype: DType = DType.F32
    op: str = "all"
    side: SidePolicy = SidePolicy.AUTO
    bypass_threshold: float = 0.05
    seed: int = 0
    trace: str | None = None
    synth: SynthConfig | None = None
    out: str | None = None
    connectivity: str | None = None  # lane-0 pattern "step:offset,..."
    sweep_values: tuple = ()

    def validate(self) -> None:
        if self.rows < 1 or self.cols < 1 or self.tiles < 1:
            raise ValueError("rows, cols and tiles must be >= 1")
        if self.lanes < 4:
            raise ValueError("need at least 4 lanes")
        if self.op not in _OPS:
            raise ValueError(f"unknown op {self.op!r}")
        if not 0.0 <= self.bypass_threshold <= 1.0:
            raise ValueError("bypass threshold must lie in [0, 1]")

    @property
    def ops(self):
        return _OPS[self.op]

    def echo_lines(self) -> list[str]:
        keys = {
            "rows": self.rows, "cols": self.cols, "lanes": self.lanes,
            "depth": self.depth, "tiles": self.tiles, "mode": self.mode.value,
            "dtype": "bf16" if self.dtype is DType.BF16 else "f32",
            "op": self.op, "side": self.side.value,
            "bypass_threshold": self.bypass_threshold, "seed": self.seed,
        }
        if self.trace:
            keys["trace"] = self.trace
        if self.synth:
            s = self.synth
            keys["synthetic"] = (f"s={s.sparsity},dims={','.join(map(str, s.dims))},"
                                 f"f={s.filters},k={s.kernel},stride={s.stride}")
        if self.connectivity:
            keys["connectivity"] = self.connectivity
        return [f"# {k}={v}" for k, v in keys.items()]


def parse_synth(text: str) -> SynthConfig:
    """Parse ``s=0.5,dims=1,128,8,8,f=16,k=3,stride=1`` (dims comma-nested)."""
    vals: dict[str, str] = {}
    key = None
    for chunk in text.split(","):
        if "=" in chunk:
            key, v = chunk.split("=", 1)
            vals[key.strip()] = v.strip()
        elif key is not None:
            vals[key] += "," + chunk.strip()
        else:
            raise ValueError(f"cannot parse synthetic input {text!r}")
    dims = tuple(int(x) for x in vals.get("dims", "1,128,8,8").split(","))
    if len(dims) != 4:
        raise ValueError(f"synthetic dims need 4 entries, got {dims}")
    return SynthConfig(sparsity=float(vals.get("s", 0.5)), dims=dims,
                       filters=int(vals.get("f", 16)), kernel=int(vals.get("k", 3)),
                       stride=int(vals.get("stride", 1)))


def parse_connectivity(text: str, lanes: int, depth: int) -> ConnectivityMap:
    """Lane-0 option list ``step:offset,...``, e.g. ``0:0,1:0,1:-1,1:+1``."""
    pattern = []
    for item in text.split(","):
        step, off = item.split(":")
        pattern.append((int(step), int(off)))
    if pattern[0] != (0, 0):
        raise ValueError("connectivity must start with the dense option 0:0")
    return connectivity_from_pattern(pattern, lanes, depth)


def load_config_file(path) -> dict:
    """Read key = value lines; later keys win; cost.* keys grouped."""
    out: dict = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"bad config line: {raw.rstrip()}")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


_INT_KEYS = {"rows", "cols", "lanes", "depth", "tiles", "seed"}
_FLOAT_KEYS = {"bypass_threshold"}


def apply_settings(cfg: RunConfig, settings: dict) -> RunConfig:
    """Overlay raw string settings (config file or flags) onto a RunConfig."""
    updates: dict = {}
    for key, value in settings.items():
        if value is None or key.startswith("cost."):
            continue
        if key in _INT_KEYS:
            updates[key] = int(value)
        elif key in _FLOAT_KEYS:
            updates[key] = float(value)
        elif key == "mode":
            updates[key] = _MODES[str(value).lower()]
        elif key == "dtype":
            updates[key] = _DTYPES[str(value).lower()]
        elif key == "side":
            updates[key] = _SIDES[str(value).lower()]
        elif key == "op":
            updates[key] = str(value).lower()
        elif key == "synthetic":
            updates["synth"] = parse_synth(value) if isinstance(value, str) else value
        elif key in {"trace", "out", "connectivity"}:
            updates[key] = value
        else:
            raise ValueError(f"unknown configuration key {key!r}")
    return replace(cfg, **updates)


def cost_table_from_settings(settings: dict, lanes: int) -> CostTable:
    """Default table with ``cost.<field>`` / ``cost.bf16.<field>`` overrides."""
    table = default_cost_table(lanes)
    overrides: dict[DType, dict] = {DType.F32: {}, DType.BF16: {}}
    for key, value in settings.items():
        if not key.startswith("cost."):
            continue
        parts = key.split(".")
        if len(parts) == 3 and parts[1] == "bf16":
            overrides[DType.BF16][parts[2]] = float(value)
        elif len(parts) == 2:
            overrides[DType.F32][parts[1]] = float(value)
        else:
            raise ValueError(f"bad cost key {key!r}")
    per = {}
    for dt, base in table.per_dtype.items():
        vals = {f.name: getattr(base, f.name) for f in fields(EventCosts)}
        vals.update(overrides[dt])
        per[dt] = EventCosts(**vals)
    return CostTable(per_dtype=per)
