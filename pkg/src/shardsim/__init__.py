"""Simulate spilled, shard-alternating training of many models on a few devices."""

from .engine import Direction, EngineOptions, ShardTask, run
from .model import ClusterSpec, DeviceSpec, InterconnectSpec, LayerProfile, ModelJob, ModelProfile
from .partition import BufferPolicy, Partitioning, partition
from .strategies import StrategyConfig, run_strategy
from .trace import SimTrace

__version__ = "0.1.0"
