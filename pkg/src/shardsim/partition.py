"""Memory-accounting partitioner: cut a layer chain into device-sized shards.

The probe that would normally run a minibatch through each layer and watch for
an out-of-memory error is replaced by the analytic pilot footprint of each
layer. Layers accumulate left to right; the layer whose footprint would push
the running total past the device capacity starts the next shard.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

from .errors import DeviceTooSmall, SingleLayerTooLarge
from .model import DeviceSpec, ModelProfile


@dataclass(frozen=True)
class BufferPolicy:
    """How much device memory to hold back for the prefetch buffer.

    kind is one of ``fraction`` (``value`` of device memory), ``absolute``
    (``value`` bytes) or ``auto`` (10% of memory, grown to the largest shard's
    parameters after one trial partition).
    """

    kind: str = "auto"
    value: float = 0.1
    overhead_bytes: int = 0

    def __post_init__(self):
        if self.kind not in ("fraction", "absolute", "auto"):
            raise ValueError(f"unknown buffer policy {self.kind!r}")
        if self.value < 0 or (self.kind == "fraction" and self.value >= 1):
            raise ValueError(f"bad buffer policy value {self.value}")
        if self.overhead_bytes < 0:
            raise ValueError("overhead_bytes must be >= 0")

    @classmethod
    def fraction(cls, frac: float, overhead_bytes: int = 0) -> BufferPolicy:
        return cls("fraction", frac, overhead_bytes)

    @classmethod
    def absolute(cls, nbytes: int, overhead_bytes: int = 0) -> BufferPolicy:
        return cls("absolute", nbytes, overhead_bytes)

    def base_reservation(self, device: DeviceSpec) -> int:
        if self.kind == "absolute":
            return int(self.value)
        frac = self.value if self.kind == "fraction" else 0.1
        return int(round(frac * device.mem_bytes))


@dataclass(frozen=True)
class Shard:
    shard_index: int
    start: int
    end: int
    param_bytes: int
    boundary_activation_bytes: int
    fwd_compute_s: float
    bwd_compute_s: float
    peak_exec_bytes: int

    @property
    def layer_range(self) -> range:
        return range(self.start, self.end)


@dataclass(frozen=True)
class Partitioning:
    model: ModelProfile
    shard_starts: tuple[int, ...]
    capacity: int | None = None
    buffer_bytes: int = 0

    def __post_init__(self):
        starts = tuple(self.shard_starts)
        object.__setattr__(self, "shard_starts", starts)
        n = self.model.n_layers
        if not starts or starts[0] != 0:
            raise ValueError("shard_starts must begin with 0")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError(f"shard_starts must be strictly increasing: {starts}")
        if starts[-1] >= n:
            raise ValueError(f"shard start {starts[-1]} out of range for {n} layers")

    @cached_property
    def shards(self) -> tuple[Shard, ...]:
        bounds = list(self.shard_starts) + [self.model.n_layers]
        out = []
        for i, (a, b) in enumerate(zip(bounds, bounds[1:])):
            layers = self.model.layers[a:b]
            out.append(Shard(
                shard_index=i,
                start=a,
                end=b,
                param_bytes=sum(l.param_bytes for l in layers),
                boundary_activation_bytes=layers[-1].activation_out_bytes,
                fwd_compute_s=math.fsum(l.fwd_compute_s for l in layers),
                bwd_compute_s=math.fsum(l.bwd_compute_s for l in layers),
                peak_exec_bytes=sum(l.pilot_footprint for l in layers),
            ))
        return tuple(out)

    @property
    def n_shards(self) -> int:
        return len(self.shard_starts)

    def to_text(self) -> str:
        """One-line boundary list, e.g. ``gpt2: 0 12 31``."""
        return f"{self.model.name}: {' '.join(map(str, self.shard_starts))}\n"

    @classmethod
    def from_text(cls, text: str, model: ModelProfile) -> Partitioning:
        name, sep, rest = text.strip().partition(":")
        if not sep:
            raise ValueError(f"malformed boundary list: {text!r}")
        if name.strip() != model.name:
            raise ValueError(f"boundary list is for {name.strip()!r}, not {model.name!r}")
        return cls(model, tuple(int(tok) for tok in rest.split()))


def _capacity(device: DeviceSpec, model: ModelProfile, reservation: int, overhead: int) -> int:
    cap = device.mem_bytes - reservation - model.input_batch_bytes - overhead
    if cap <= 0:
        raise DeviceTooSmall(device.device_id, -cap)
    return cap


def greedy_cuts(footprints, capacity: int) -> list[int]:
    """Shard starts for a footprint sequence; ties do not cut."""
    starts = [0]
    running = 0
    for i, fp in enumerate(footprints):
        if fp > capacity:
            raise SingleLayerTooLarge(i, fp, capacity)
        if running + fp > capacity:
            starts.append(i)
            running = fp
        else:
            running += fp
    return starts


def buffer_reservation(device: DeviceSpec, model: ModelProfile, policy: BufferPolicy) -> int:
    base = policy.base_reservation(device)
    if policy.kind != "auto":
        return base
    trial_cap = _capacity(device, model, base, policy.overhead_bytes)
    starts = greedy_cuts([l.pilot_footprint for l in model.layers], trial_cap)
    largest = max(p.param_bytes for p in Partitioning(model, tuple(starts)).shards)
    return max(base, largest)


def effective_capacity(device: DeviceSpec, model: ModelProfile, buffer_policy: BufferPolicy) -> int:
    reservation = buffer_reservation(device, model, buffer_policy)
    return _capacity(device, model, reservation, buffer_policy.overhead_bytes)


def partition(model: ModelProfile, device: DeviceSpec,
              buffer_policy: BufferPolicy | None = None) -> Partitioning:
    policy = buffer_policy or BufferPolicy()
    reservation = buffer_reservation(device, model, policy)
    cap = _capacity(device, model, reservation, policy.overhead_bytes)
    starts = greedy_cuts([l.pilot_footprint for l in model.layers], cap)
    return Partitioning(model, tuple(starts), capacity=cap, buffer_bytes=reservation)


@dataclass(frozen=True)
class PartitionStats:
    n_shards: int
    max_param_bytes: int
    min_param_bytes: int
    imbalance: float
    boundaries: tuple[int, ...] = field(default=())


def partition_stats(p: Partitioning) -> PartitionStats:
    fwd = [s.fwd_compute_s for s in p.shards]
    params = [s.param_bytes for s in p.shards]
    return PartitionStats(
        n_shards=p.n_shards,
        max_param_bytes=max(params),
        min_param_bytes=min(params),
        imbalance=max(fwd) / (math.fsum(fwd) / len(fwd)),
        boundaries=p.shard_starts,
    )
