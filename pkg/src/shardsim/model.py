"""Domain types, cost model and synthetic model generators.

All byte quantities are Python ints, all durations float seconds. Every type
here is a frozen dataclass: construct once, share freely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

GB = 10**9
GiB = 2**30

# byte counts beyond int64 are rejected so configs stay portable to other tools
MAX_BYTES = 2**63 - 1

# Host-side training state per parameter byte: params, grads, two Adam moments.
HOST_STATE_PARAM_MULTIPLIER = 4


def _check_bytes(name: str, value: int) -> None:
    if value < 0:
        raise ValueError(f"{name} must be >= 0, got {value}")
    if value > MAX_BYTES:
        raise OverflowError(f"{name}={value} overflows int64 byte arithmetic")


@dataclass(frozen=True)
class LayerProfile:
    param_bytes: int
    activation_out_bytes: int
    fwd_compute_s: float
    bwd_compute_s: float | None = None
    workspace_bytes: int = 0
    name: str = ""

    def __post_init__(self):
        for attr in ("param_bytes", "activation_out_bytes", "workspace_bytes"):
            _check_bytes(attr, getattr(self, attr))
        if self.bwd_compute_s is None:
            object.__setattr__(self, "bwd_compute_s", 2.0 * self.fwd_compute_s)
        if not (math.isfinite(self.fwd_compute_s) and math.isfinite(self.bwd_compute_s)):
            raise ValueError("compute durations must be finite")
        if self.fwd_compute_s <= 0:
            raise ValueError("fwd_compute_s must be > 0")
        if self.bwd_compute_s < 0:
            raise ValueError("bwd_compute_s must be >= 0")
        if self.pilot_footprint <= 0:
            raise ValueError("layer has an empty memory footprint")

    @property
    def pilot_footprint(self) -> int:
        """Bytes held on device after forward+backward through this layer alone.

        Parameters and their gradients, the output activation and its gradient,
        plus transient workspace.
        """
        return 2 * self.param_bytes + 2 * self.activation_out_bytes + self.workspace_bytes


def pilot_footprint(layer: LayerProfile) -> int:
    return layer.pilot_footprint


@dataclass(frozen=True)
class ModelProfile:
    name: str
    layers: tuple[LayerProfile, ...]
    input_batch_bytes: int = 0

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ValueError(f"model {self.name!r} has no layers")
        _check_bytes("input_batch_bytes", self.input_batch_bytes)
        _check_bytes("total_param_bytes", self.total_param_bytes)

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    @property
    def total_param_bytes(self) -> int:
        return sum(layer.param_bytes for layer in self.layers)

    @property
    def total_fwd_s(self) -> float:
        return math.fsum(layer.fwd_compute_s for layer in self.layers)

    @property
    def total_bwd_s(self) -> float:
        return math.fsum(layer.bwd_compute_s for layer in self.layers)

    @property
    def total_pilot_footprint(self) -> int:
        return sum(layer.pilot_footprint for layer in self.layers)

    def host_state_bytes(self) -> int:
        """DRAM needed to hold this model's spilled training state."""
        checkpoints = sum(layer.activation_out_bytes for layer in self.layers)
        return HOST_STATE_PARAM_MULTIPLIER * self.total_param_bytes + checkpoints


@dataclass(frozen=True)
class DeviceSpec:
    device_id: str
    mem_bytes: int
    compute_scale: float = 1.0
    busy_power_w: float = 300.0
    idle_power_w: float = 50.0
    hourly_price: float = 0.0

    def __post_init__(self):
        if self.mem_bytes <= 0:
            raise ValueError(f"device {self.device_id}: mem_bytes must be > 0")
        _check_bytes("mem_bytes", self.mem_bytes)
        if self.compute_scale <= 0:
            raise ValueError(f"device {self.device_id}: compute_scale must be > 0")
        if not self.busy_power_w >= self.idle_power_w >= 0:
            raise ValueError(f"device {self.device_id}: need busy_power_w >= idle_power_w >= 0")


@dataclass(frozen=True)
class InterconnectSpec:
    kind: str  # "host-to-device" | "device-to-device"
    bandwidth_Bps: float
    latency_s: float = 0.0
    duplex: bool = True
    shared: bool = False

    def __post_init__(self):
        if self.kind not in ("host-to-device", "device-to-device"):
            raise ValueError(f"unknown interconnect kind {self.kind!r}")
        if not self.bandwidth_Bps > 0:
            raise ValueError("bandwidth_Bps must be > 0")
        if self.latency_s < 0:
            raise ValueError("latency_s must be >= 0")


@dataclass(frozen=True)
class ClusterSpec:
    devices: tuple[DeviceSpec, ...]
    host_dram_bytes: int
    h2d: InterconnectSpec
    d2d: InterconnectSpec | None = None

    def __post_init__(self):
        object.__setattr__(self, "devices", tuple(self.devices))
        if not self.devices:
            raise ValueError("cluster needs at least one device")
        ids = [d.device_id for d in self.devices]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate device ids: {ids}")
        if self.host_dram_bytes <= 0:
            raise ValueError("host_dram_bytes must be > 0")
        if self.h2d.kind != "host-to-device":
            raise ValueError("h2d link must be of kind host-to-device")
        if self.d2d is not None and self.d2d.kind != "device-to-device":
            raise ValueError("d2d link must be of kind device-to-device")

    @property
    def n_devices(self) -> int:
        return len(self.devices)

    def device(self, device_id: str) -> DeviceSpec:
        for d in self.devices:
            if d.device_id == device_id:
                return d
        raise KeyError(device_id)

    def with_devices(self, n: int) -> ClusterSpec:
        """First ``n`` devices of this cluster (same links and host)."""
        return replace(self, devices=self.devices[:n])


@dataclass(frozen=True)
class ModelJob:
    job_id: str
    model: ModelProfile
    epochs: int = 1
    minibatches_per_epoch: int = 1
    batch_size: int = 1
    hyperparams: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.epochs < 1 or self.minibatches_per_epoch < 1:
            raise ValueError(f"job {self.job_id}: epochs and minibatches_per_epoch must be >= 1")

    @property
    def n_minibatches(self) -> int:
        return self.epochs * self.minibatches_per_epoch


def make_uniform_model(n_layers: int, per_layer: LayerProfile, input_batch_bytes: int = 0,
                       name: str = "uniform") -> ModelProfile:
    if n_layers < 1:
        raise ValueError("n_layers must be >= 1")
    return ModelProfile(name=name, layers=(per_layer,) * n_layers, input_batch_bytes=input_batch_bytes)


def transformer_block_flops(d_model: int, seq_len: int, batch_size: int) -> int:
    # dense matmuls + attention score/value products, forward only
    tokens = batch_size * seq_len
    return 24 * tokens * d_model**2 + 4 * batch_size * seq_len**2 * d_model


def make_transformer_model(n_blocks: int, d_model: int, seq_len: int, batch_size: int,
                           bytes_per_param: int, device_reference_flops: float,
                           vocab_size: int = 50257, workspace_bytes: int = 0,
                           name: str | None = None) -> ModelProfile:
    """GPT-style decoder stack: embedding layer, ``n_blocks`` blocks, LM head.

    Blocks carry 12*d^2 parameters; the head is weight-tied to the embedding so
    only its final layer norm adds parameters. Backward is twice forward.
    """
    for arg, v in dict(n_blocks=n_blocks, d_model=d_model, seq_len=seq_len, batch_size=batch_size,
                       bytes_per_param=bytes_per_param, vocab_size=vocab_size).items():
        if v < 1:
            raise ValueError(f"{arg} must be >= 1")
    if not device_reference_flops > 0:
        raise ValueError("device_reference_flops must be > 0")

    tokens = batch_size * seq_len
    act_bytes = tokens * d_model * bytes_per_param

    embed = LayerProfile(
        param_bytes=(vocab_size + seq_len) * d_model * bytes_per_param,
        activation_out_bytes=act_bytes,
        fwd_compute_s=2 * tokens * d_model / device_reference_flops,
        name="embed",
    )
    fwd_s = transformer_block_flops(d_model, seq_len, batch_size) / device_reference_flops
    block = LayerProfile(
        param_bytes=12 * d_model**2 * bytes_per_param,
        activation_out_bytes=act_bytes,
        fwd_compute_s=fwd_s,
        bwd_compute_s=2 * fwd_s,
        workspace_bytes=workspace_bytes,
        name="block",
    )
    head = LayerProfile(
        param_bytes=2 * d_model * bytes_per_param,
        activation_out_bytes=tokens * vocab_size * bytes_per_param,
        fwd_compute_s=2 * tokens * d_model * vocab_size / device_reference_flops,
        name="head",
    )
    if name is None:
        name = f"transformer-{n_blocks}x{d_model}"
    return ModelProfile(name=name, layers=(embed, *([block] * n_blocks), head),
                        input_batch_bytes=tokens * 8)


def scaled_transformer(target_params: float, n_blocks: int = 48, seq_len: int = 512,
                       batch_size: int = 1, bytes_per_param: int = 4,
                       device_reference_flops: float = 30e12, vocab_size: int = 50257) -> ModelProfile:
    """GPT-2-shaped profile at fixed depth, width solved for ``target_params``.

    Width is rounded to a multiple of 64 like real model families.
    """
    if target_params <= 0:
        raise ValueError("target_params must be > 0")
    # 12 L d^2 + (V + S) d - P = 0
    a, b = 12 * n_blocks, vocab_size + seq_len
    d = (-b + math.sqrt(b * b + 4 * a * target_params)) / (2 * a)
    d_model = max(64, int(round(d / 64)) * 64)
    return make_transformer_model(n_blocks, d_model, seq_len, batch_size, bytes_per_param,
                                  device_reference_flops, vocab_size=vocab_size,
                                  name=f"gpt2-scaled-{target_params:.3g}")


def param_count(model: ModelProfile, bytes_per_param: int) -> float:
    return model.total_param_bytes / bytes_per_param


def total_compute_s(layers: Sequence[LayerProfile]) -> float:
    return math.fsum(layer.fwd_compute_s + layer.bwd_compute_s for layer in layers)
