"""Workload configuration files (strict JSON).

Every section is a dataclass mirroring the file; unknown keys are errors and
``to_dict`` writes every field back, so parse -> serialize -> parse is the
identity. ``resolve`` turns a config into domain objects.
"""

from __future__ import annotations

import json
import typing
from dataclasses import MISSING, dataclass, field, fields
from pathlib import Path
from typing import Any

from . import presets
from .engine import EngineOptions
from .errors import ConfigError
from .model import (ClusterSpec, DeviceSpec, InterconnectSpec, LayerProfile, ModelJob, ModelProfile,
                    make_transformer_model, make_uniform_model, scaled_transformer)
from .partition import BufferPolicy
from .strategies import StrategyConfig

SCHEMA_VERSION = 1


def _load(cls, data: Any, path: str):
    """Build dataclass ``cls`` from ``data``, rejecting unknown or missing keys."""
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected an object, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{path}: unknown field(s) {unknown}")
    kwargs = {}
    for f in fields(cls):
        sub = f"{path}.{f.name}"
        if f.name not in data:
            if f.default is MISSING and f.default_factory is MISSING:
                raise ConfigError(f"{sub}: required")
            continue
        kwargs[f.name] = _convert(hints[f.name], data[f.name], sub)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _convert(tp, value, path: str):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin is typing.Union or (origin is not None and str(origin) == "<class 'types.UnionType'>"):
        if value is None:
            if type(None) in args:
                return None
            raise ConfigError(f"{path}: must not be null")
        (inner,) = [a for a in args if a is not type(None)]
        return _convert(inner, value, path)
    if origin is list:
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list")
        return [_convert(args[0], v, f"{path}[{i}]") for i, v in enumerate(value)]
    if origin is dict:
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected an object")
        return {str(k): _convert(args[1], v, f"{path}.{k}") for k, v in value.items()}
    if isinstance(tp, type) and hasattr(tp, "__dataclass_fields__"):
        return _load(tp, value, path)
    if tp is Any:
        if not isinstance(value, (str, int, float, bool)) and value is not None:
            raise ConfigError(f"{path}: expected a scalar")
        return value
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise ConfigError(f"{path}: expected an integer")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string")
        return value
    raise ConfigError(f"{path}: unsupported type {tp}")  # pragma: no cover


def _dump(obj):
    if hasattr(obj, "__dataclass_fields__"):
        return {f.name: _dump(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, list):
        return [_dump(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _dump(v) for k, v in obj.items()}
    return obj


# -- sections -------------------------------------------------------------------

@dataclass
class DeviceConfig:
    device_id: str
    mem_bytes: int
    compute_scale: float = 1.0
    busy_power_w: float = 300.0
    idle_power_w: float = 50.0
    hourly_price: float = 0.0


@dataclass
class LinkConfig:
    bandwidth_Bps: float
    latency_s: float = 0.0
    duplex: bool = True
    shared: bool = False


@dataclass
class ClusterConfig:
    preset: str | None = None
    n_devices: int | None = None
    devices: list[DeviceConfig] = field(default_factory=list)
    host_dram_bytes: int | None = None
    h2d: LinkConfig | None = None
    d2d: LinkConfig | None = None

    def build(self) -> ClusterSpec:
        if self.preset is not None:
            if self.preset not in presets.CLUSTERS:
                raise ConfigError(f"cluster.preset: unknown {self.preset!r}; have {sorted(presets.CLUSTERS)}")
            if self.devices or self.h2d or self.d2d:
                raise ConfigError("cluster: give either preset or explicit devices/links, not both")
            kwargs = {}
            if self.n_devices is not None:
                kwargs["n"] = self.n_devices
            if self.host_dram_bytes is not None:
                kwargs["host_dram_bytes"] = self.host_dram_bytes
            return presets.CLUSTERS[self.preset](**kwargs)
        if not self.devices or self.h2d is None or self.host_dram_bytes is None:
            raise ConfigError("cluster: need devices, h2d and host_dram_bytes (or a preset)")
        if self.n_devices is not None and self.n_devices != len(self.devices):
            raise ConfigError("cluster.n_devices disagrees with the device list")
        devs = tuple(DeviceSpec(**_dump(d)) for d in self.devices)
        h2d = InterconnectSpec("host-to-device", **_dump(self.h2d))
        d2d = InterconnectSpec("device-to-device", **_dump(self.d2d)) if self.d2d else None
        return ClusterSpec(devs, self.host_dram_bytes, h2d, d2d)


@dataclass
class LayerConfig:
    param_bytes: int
    activation_out_bytes: int
    fwd_compute_s: float
    bwd_compute_s: float | None = None
    workspace_bytes: int = 0
    name: str = ""


MODEL_KINDS = ("layers", "uniform", "transformer", "scaled-transformer")


@dataclass
class ModelConfig:
    """One model; which fields apply depends on ``kind``."""

    kind: str
    layers: list[LayerConfig] = field(default_factory=list)
    n_layers: int | None = None
    layer: LayerConfig | None = None
    input_batch_bytes: int = 0
    n_blocks: int = 48
    d_model: int | None = None
    seq_len: int = 512
    batch_size: int = 1
    bytes_per_param: int = 4
    device_reference_flops: float = 30e12
    vocab_size: int = 50257
    workspace_bytes: int = 0
    target_params: float | None = None

    def build(self, name: str) -> ModelProfile:
        if self.kind == "layers":
            if not self.layers:
                raise ConfigError(f"models.{name}: empty layer list")
            return ModelProfile(name, tuple(LayerProfile(**_dump(lc)) for lc in self.layers),
                                self.input_batch_bytes)
        if self.kind == "uniform":
            if self.n_layers is None or self.layer is None:
                raise ConfigError(f"models.{name}: uniform needs n_layers and layer")
            return make_uniform_model(self.n_layers, LayerProfile(**_dump(self.layer)),
                                      self.input_batch_bytes, name=name)
        if self.kind == "transformer":
            if self.d_model is None:
                raise ConfigError(f"models.{name}: transformer needs d_model")
            return make_transformer_model(self.n_blocks, self.d_model, self.seq_len, self.batch_size,
                                          self.bytes_per_param, self.device_reference_flops,
                                          vocab_size=self.vocab_size, workspace_bytes=self.workspace_bytes,
                                          name=name)
        if self.kind == "scaled-transformer":
            if self.target_params is None:
                raise ConfigError(f"models.{name}: scaled-transformer needs target_params")
            m = scaled_transformer(self.target_params, n_blocks=self.n_blocks, seq_len=self.seq_len,
                                   batch_size=self.batch_size, bytes_per_param=self.bytes_per_param,
                                   device_reference_flops=self.device_reference_flops,
                                   vocab_size=self.vocab_size)
            return ModelProfile(name, m.layers, m.input_batch_bytes)
        raise ConfigError(f"models.{name}.kind: unknown {self.kind!r}; expected one of {MODEL_KINDS}")


@dataclass
class JobConfig:
    job_id: str
    model: str
    epochs: int = 1
    minibatches_per_epoch: int = 1
    batch_size: int = 1
    hyperparams: dict[str, Any] = field(default_factory=dict)


@dataclass
class PresetConfig:
    name: str
    epochs: int = 1
    minibatches_per_epoch: int = 4


@dataclass
class StrategyEntry:
    kind: str
    microbatches: int = 1
    gpus_per_model: int | None = None
    name: str | None = None


@dataclass
class BufferPolicyConfig:
    kind: str = "auto"
    value: float = 0.1
    overhead_bytes: int = 0


@dataclass
class OptionsConfig:
    duplex: bool | None = None
    shared_link: bool | None = None
    double_buffer: bool = True
    prefetch_depth: int = 1
    buffer_policy: BufferPolicyConfig = field(default_factory=BufferPolicyConfig)


@dataclass
class WorkloadConfig:
    schema_version: int
    cluster: ClusterConfig
    models: dict[str, ModelConfig] = field(default_factory=dict)
    preset: PresetConfig | None = None
    jobs: list[JobConfig] = field(default_factory=list)
    strategies: list[StrategyEntry] = field(default_factory=list)
    seed: int = 0
    options: OptionsConfig = field(default_factory=OptionsConfig)

    def to_dict(self) -> dict:
        return _dump(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    # -- resolution into domain objects --

    def build_cluster(self) -> ClusterSpec:
        try:
            return self.cluster.build()
        except ValueError as exc:
            raise ConfigError(f"cluster: {exc}") from exc

    def build_jobs(self) -> list[ModelJob]:
        try:
            models = {name: mc.build(name) for name, mc in sorted(self.models.items())}
            jobs: list[ModelJob] = []
            if self.preset is not None:
                if self.preset.name not in presets.WORKLOADS:
                    raise ConfigError(f"preset.name: unknown {self.preset.name!r}; "
                                      f"have {sorted(presets.WORKLOADS)}")
                jobs += presets.WORKLOADS[self.preset.name](self.preset.epochs,
                                                           self.preset.minibatches_per_epoch)
            for i, jc in enumerate(self.jobs):
                if jc.model not in models:
                    raise ConfigError(f"jobs[{i}].model: no model named {jc.model!r}")
                jobs.append(ModelJob(jc.job_id, models[jc.model], jc.epochs, jc.minibatches_per_epoch,
                                     jc.batch_size, dict(jc.hyperparams)))
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        ids = [j.job_id for j in jobs]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"duplicate job ids: {sorted({i for i in ids if ids.count(i) > 1})}")
        return jobs

    def build_strategies(self) -> list[StrategyConfig]:
        try:
            return [StrategyConfig(**_dump(s)) for s in self.strategies]
        except ValueError as exc:
            raise ConfigError(f"strategies: {exc}") from exc

    def engine_options(self) -> EngineOptions:
        o = self.options
        try:
            return EngineOptions(double_buffer=o.double_buffer, prefetch_depth=o.prefetch_depth,
                                 duplex=o.duplex, shared=o.shared_link)
        except ValueError as exc:
            raise ConfigError(f"options: {exc}") from exc

    def buffer_policy(self) -> BufferPolicy:
        try:
            return BufferPolicy(**_dump(self.options.buffer_policy))
        except ValueError as exc:
            raise ConfigError(f"options.buffer_policy: {exc}") from exc


def parse_config(data: dict) -> WorkloadConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    if "schema_version" not in data:
        raise ConfigError("schema_version: required")
    if data["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: expected {SCHEMA_VERSION}, got {data['schema_version']!r}")
    return _load(WorkloadConfig, data, "config")


def loads_config(text: str) -> WorkloadConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    return parse_config(data)


def load_config(path: str | Path) -> WorkloadConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return loads_config(text)
