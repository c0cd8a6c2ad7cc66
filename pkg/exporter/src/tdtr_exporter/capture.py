"""Hook a torch training loop and dump per-layer operands to TDTR files.

One randomly chosen batch is traced per epoch: for every captured Conv2d
or Linear the layer input (A), the weights (W) and the gradient of the
layer output (G) are recorded bit-exact in float32, one file per epoch.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .writer import KIND_A, KIND_G, KIND_W, Record, write_tdtr

SUPPORTED = (nn.Conv2d, nn.Linear)


@dataclass
class ExportSpec:
    model_id: str
    out_dir: str
    epochs: int = 1
    seed: int = 0
    layers: list[str] | None = None  # module names; None captures all supported

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("need at least one epoch")


def _as4d(t: torch.Tensor) -> np.ndarray:
    a = t.detach().cpu().contiguous()
    if a.dtype is not torch.float32:
        raise ValueError(f"expected float32 tensors, got {a.dtype}")
    arr = a.numpy()
    while arr.ndim < 4:
        arr = arr[..., None]
    if arr.ndim != 4:
        raise ValueError(f"cannot treat shape {tuple(a.shape)} as 4-D")
    return arr


def _layer_meta(module: nn.Module) -> tuple[int, tuple[int, int]] | None:
    """(stride, kernel) for a supported module, None when not exportable."""
    if isinstance(module, nn.Conv2d):
        sh, sw = module.stride
        if sh != sw:
            return None
        return sh, (module.kernel_size[0], module.kernel_size[1])
    if isinstance(module, nn.Linear):
        return 1, (1, 1)
    return None


class TraceCapture:
    """Forward/backward hooks collecting A, W and G for selected layers."""

    def __init__(self, model: nn.Module, layers=None):
        self.records: list[Record] = []
        self._handles = []
        self._layer_ids: dict[str, int] = {}
        self.epoch_id = 0
        wanted = set(layers) if layers is not None else None
        next_id = 0
        for name, module in model.named_modules():
            if wanted is not None and name not in wanted:
                continue
            if wanted is None and not isinstance(module, SUPPORTED):
                continue
            meta = _layer_meta(module)
            if meta is None:
                warnings.warn(f"layer {name!r} ({type(module).__name__}) is not "
                              f"exportable, skipping")
                continue
            self._layer_ids[name] = next_id
            self._attach(name, module, next_id, *meta)
            next_id += 1
        if not self._layer_ids:
            raise ValueError("no exportable layers found")

    def _attach(self, name, module, layer_id, stride, kernel):
        def fwd_hook(mod, inputs, output):
            a = _as4d(inputs[0])
            w = _as4d(mod.weight)
            self.records.append(Record(name=f"{name}.A", kind=KIND_A,
                                       layer_id=layer_id, epoch_id=self.epoch_id,
                                       stride=stride, kernel=kernel, data=a))
            self.records.append(Record(name=f"{name}.W", kind=KIND_W,
                                       layer_id=layer_id, epoch_id=self.epoch_id,
                                       stride=stride, kernel=kernel, data=w))
            if output.requires_grad:
                def grad_hook(grad):
                    self.records.append(Record(
                        name=f"{name}.G", kind=KIND_G, layer_id=layer_id,
                        epoch_id=self.epoch_id, stride=stride, kernel=kernel,
                        data=_as4d(grad)))
                output.register_hook(grad_hook)

        self._handles.append(module.register_forward_hook(fwd_hook))

    def detach(self):
        for h in self._handles:
            h.remove()
        self._handles.clear()

    def take_records(self) -> list[Record]:
        recs, self.records = self.records, []
        return recs


def export_epoch_traces(spec: ExportSpec, model: nn.Module, batches,
                        loss_fn, optimizer=None) -> list[Path]:
    """Trace one randomly sampled batch per epoch into TDTR files.

    ``batches`` is an indexable collection of (inputs, targets). The model
    is stepped normally when an optimizer is given; tracing itself never
    mutates it. Returns the written paths, one per epoch.
    """
    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    capture = TraceCapture(model, spec.layers)
    paths = []
    try:
        for epoch in range(spec.epochs):
            capture.epoch_id = epoch
            idx = int(rng.integers(0, len(batches)))
            inputs, targets = batches[idx]
            output = model(inputs)
            loss = loss_fn(output, targets)
            if optimizer is not None:
                optimizer.zero_grad()
            loss.backward()
            if optimizer is not None:
                optimizer.step()
            path = out_dir / f"{spec.model_id}_epoch{epoch:03d}.tdtr"
            write_tdtr(path, capture.take_records())
            paths.append(path)
    finally:
        capture.detach()
    return paths
