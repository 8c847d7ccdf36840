"""Execution strategies: compile (jobs, cluster) into a scheduler plus engine options."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

from ..engine import EngineOptions, Scheduler, ShardTask, run, transfer_time
from ..errors import BufferTooSmall, HostOOM, InfeasibleError, InfeasibleOOM
from ..model import ClusterSpec, ModelJob, ModelProfile
from ..partition import BufferPolicy, Partitioning, buffer_reservation, partition
from ..trace import EventKind, SimTrace, TraceEvent
from .exact import (MAX_DEVICES, MAX_TASKS, ScheduledTask, TaskInstance, TaskSpec, exact_optimal,
                    fold_tasks, lower_bounds, lrtf_reduced)
from .groups import GroupScheduler
from .sharp import JobProgress, SharpScheduler, sharp_next_task
from .tasks import resident_tasks, spilled_tasks, split_for_devices, stages_or_oom, min_stage_footprint

KINDS = ("sharp", "task-parallel", "model-parallel", "pipeline-parallel", "hybrid", "exact-optimal")

# What each strategy needs from the hardware, for feasibility reports.
PRECONDITIONS = {
    "sharp": {"device": "largest layer pilot footprint <= device memory - prefetch buffer - batch",
              "host": "sum of spilled model state <= host DRAM"},
    "task-parallel": {"device": "whole-model footprint + batch <= memory of every device"},
    "model-parallel": {"device": "contiguous split into gpus_per_model stages, each stage footprint "
                                 "+ batch <= its device memory"},
    "pipeline-parallel": {"device": "as model-parallel"},
    "hybrid": {"device": "as model-parallel, per group", "groups": "gpus_per_model divides device count"},
    "exact-optimal": {"size": f"<= {MAX_TASKS} tasks and <= {MAX_DEVICES} devices"},
}


@dataclass(frozen=True)
class StrategyConfig:
    kind: str
    microbatches: int = 1
    gpus_per_model: int | None = None
    name: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown strategy {self.kind!r}; expected one of {KINDS}")
        if self.microbatches < 1:
            raise ValueError("microbatches must be >= 1")
        if self.gpus_per_model is not None and self.gpus_per_model < 1:
            raise ValueError("gpus_per_model must be >= 1")

    @property
    def label(self) -> str:
        return self.name or self.kind

    def group_size(self, cluster: ClusterSpec) -> int:
        if self.kind == "task-parallel":
            return 1
        k = self.gpus_per_model or (2 if self.kind == "hybrid" else cluster.n_devices)
        if k > cluster.n_devices:
            raise ValueError(f"{self.label}: gpus_per_model={k} exceeds {cluster.n_devices} devices")
        if self.kind == "hybrid" and cluster.n_devices % k:
            raise ValueError(f"hybrid: gpus_per_model={k} does not divide {cluster.n_devices} devices")
        return k


@dataclass
class Plan:
    strategy: StrategyConfig
    scheduler: Scheduler
    options: EngineOptions
    job_tasks: dict[str, list[ShardTask]]
    partitionings: dict[str, Partitioning] = field(default_factory=dict)


@dataclass(frozen=True)
class Feasibility:
    ok: bool
    detail: str = ""
    deficit_bytes: int = 0

    def __str__(self):
        return "OK" if self.ok else f"InfeasibleOOM({self.detail})"


def spill_estimate(cluster: ClusterSpec):
    """Per-task time estimate: compute, plus whatever input transfer it cannot hide."""
    def est(t: ShardTask) -> float:
        moved = t.param_load_bytes + t.activation_in_bytes + t.checkpoint_in_bytes
        return t.compute_s + max(0.0, transfer_time(moved, cluster.h2d) - t.compute_s)
    return est


def spill_partitionings(jobs: Sequence[ModelJob], cluster: ClusterSpec,
                        buffer_policy: BufferPolicy | None = None) -> tuple[dict[str, Partitioning], int]:
    """Partition every job for the smallest device with one shared prefetch buffer size."""
    policy = buffer_policy or BufferPolicy()
    device = min(cluster.devices, key=lambda d: d.mem_bytes)
    models = {j.model.name: j.model for j in jobs}
    reserve = max(buffer_reservation(device, m, policy) for m in models.values())
    common = BufferPolicy.absolute(reserve, policy.overhead_bytes)
    parts = {name: partition(m, device, common) for name, m in models.items()}
    return {j.job_id: parts[j.model.name] for j in jobs}, reserve


def check_host(jobs: Sequence[ModelJob], cluster: ClusterSpec) -> None:
    need = sum(j.model.host_state_bytes() for j in jobs)
    if need > cluster.host_dram_bytes:
        raise HostOOM(need, cluster.host_dram_bytes)


def build_sharp(jobs: Sequence[ModelJob], cluster: ClusterSpec,
                partitionings: dict[str, Partitioning] | None = None,
                buffer_policy: BufferPolicy | None = None,
                options: EngineOptions | None = None) -> Plan:
    check_host(jobs, cluster)
    if partitionings is None:
        partitionings, reserve = spill_partitionings(jobs, cluster, buffer_policy)
    else:
        reserve = max(p.buffer_bytes for p in partitionings.values())
    ids = itertools.count()
    job_tasks = {j.job_id: spilled_tasks(j, partitionings[j.job_id], ids) for j in jobs}
    sched = SharpScheduler(job_tasks, spill_estimate(cluster))
    opts = options or EngineOptions()
    if opts.buffer_bytes is None and reserve:
        opts = replace(opts, buffer_bytes=reserve)
    if opts.double_buffer and opts.buffer_bytes is not None:
        for job_id, p in sorted(partitionings.items()):
            big = max(p.shards, key=lambda s: s.param_bytes)
            if big.param_bytes > opts.buffer_bytes:
                raise BufferTooSmall(job_id, big.shard_index, big.param_bytes, opts.buffer_bytes)
    return Plan(StrategyConfig("sharp"), sched, opts, job_tasks, dict(partitionings))


def _build_groups(cfg: StrategyConfig, jobs: Sequence[ModelJob], cluster: ClusterSpec,
                  groups: list[tuple[str, ...]], options: EngineOptions | None) -> Plan:
    k = len(groups[0])
    mem = min(cluster.device(d).mem_bytes for g in groups for d in g)
    smallest = min((cluster.device(d) for g in groups for d in g), key=lambda d: d.mem_bytes)
    ids = itertools.count()
    job_tasks = {}
    for j in jobs:
        stages = stages_or_oom(j, k, smallest.device_id, mem)
        job_tasks[j.job_id] = resident_tasks(j, stages, ids, cfg.microbatches)
    totals = {job: math.fsum(t.compute_s for t in ts) for job, ts in job_tasks.items()}
    sched = GroupScheduler(job_tasks, groups, totals)
    return Plan(cfg, sched, options or EngineOptions(), job_tasks)


def build_task_parallel(jobs, cluster, options=None) -> Plan:
    cfg = StrategyConfig("task-parallel")
    for j in jobs:
        need = j.model.total_pilot_footprint + j.model.input_batch_bytes
        for d in sorted(cluster.devices, key=lambda d: d.mem_bytes):
            if need > d.mem_bytes:
                raise InfeasibleOOM(j.job_id, d.device_id, need - d.mem_bytes)
    return _build_groups(cfg, jobs, cluster, [(d.device_id,) for d in cluster.devices], options)


def build_model_parallel(jobs, cluster, gpus_per_model=None, options=None) -> Plan:
    cfg = StrategyConfig("model-parallel", gpus_per_model=gpus_per_model)
    k = cfg.group_size(cluster)
    group = tuple(d.device_id for d in cluster.devices[:k])
    return _build_groups(cfg, jobs, cluster, [group], options)


def build_pipeline_parallel(jobs, cluster, microbatches, gpus_per_model=None, options=None) -> Plan:
    cfg = StrategyConfig("pipeline-parallel", microbatches=microbatches, gpus_per_model=gpus_per_model)
    k = cfg.group_size(cluster)
    group = tuple(d.device_id for d in cluster.devices[:k])
    return _build_groups(cfg, jobs, cluster, [group], options)


def build_hybrid(jobs, cluster, gpus_per_model=2, options=None) -> Plan:
    cfg = StrategyConfig("hybrid", gpus_per_model=gpus_per_model)
    k = cfg.group_size(cluster)
    ids = [d.device_id for d in cluster.devices]
    groups = [tuple(ids[i:i + k]) for i in range(0, len(ids), k)]
    return _build_groups(cfg, jobs, cluster, groups, options)


def build_plan(cfg: StrategyConfig, jobs: Sequence[ModelJob], cluster: ClusterSpec,
               options: EngineOptions | None = None, buffer_policy: BufferPolicy | None = None) -> Plan:
    if not jobs:
        raise ValueError("no jobs to schedule")
    if cfg.kind == "sharp":
        plan = build_sharp(jobs, cluster, buffer_policy=buffer_policy, options=options)
        plan.strategy = cfg
        return plan
    if cfg.kind == "task-parallel":
        plan = build_task_parallel(jobs, cluster, options)
    elif cfg.kind == "model-parallel":
        plan = build_model_parallel(jobs, cluster, cfg.gpus_per_model, options)
    elif cfg.kind == "pipeline-parallel":
        plan = build_pipeline_parallel(jobs, cluster, cfg.microbatches, cfg.gpus_per_model, options)
    elif cfg.kind == "hybrid":
        plan = build_hybrid(jobs, cluster, cfg.group_size(cluster), options)
    else:
        raise ValueError(f"{cfg.kind} has no event-driven plan; use run_strategy")
    plan.strategy = cfg
    return plan


def exact_trace(jobs: Sequence[ModelJob], cluster: ClusterSpec,
                buffer_policy: BufferPolicy | None = None) -> SimTrace:
    """Optimal schedule of the folded spilled instance, rendered as a trace."""
    plan = build_sharp(jobs, cluster, buffer_policy=buffer_policy)
    tasks = [t for ts in plan.job_tasks.values() for t in ts]
    instance = replace(fold_tasks(tasks, cluster.h2d), devices=cluster.n_devices)
    _, schedule = exact_optimal(instance)
    dev_ids = [d.device_id for d in cluster.devices]
    events = [TraceEvent(f"{dev_ids[s.device]}/compute", EventKind.COMPUTE, s.task_id, s.start_s, s.end_s)
              for s in schedule]
    placement = {s.task_id: dev_ids[s.device] for s in schedule}
    return SimTrace(events, {t.task_id: t for t in tasks}, placement, tuple(dev_ids),
                    meta={"reduced_model": True})


def run_strategy(cfg: StrategyConfig, jobs: Sequence[ModelJob], cluster: ClusterSpec,
                 options: EngineOptions | None = None,
                 buffer_policy: BufferPolicy | None = None) -> SimTrace:
    if cfg.kind == "exact-optimal":
        return exact_trace(jobs, cluster, buffer_policy)
    plan = build_plan(cfg, jobs, cluster, options, buffer_policy)
    return run(cluster, plan.scheduler, plan.options)


def check_feasible(cfg: StrategyConfig, model: ModelProfile, cluster: ClusterSpec,
                   buffer_policy: BufferPolicy | None = None) -> Feasibility:
    """Capacity arithmetic only; no simulation."""
    job = ModelJob("probe", model)
    try:
        if cfg.kind in ("sharp", "exact-optimal"):
            check_host([job], cluster)
            spill_partitionings([job], cluster, buffer_policy)
        elif cfg.kind == "task-parallel":
            need = model.total_pilot_footprint + model.input_batch_bytes
            d = min(cluster.devices, key=lambda d: d.mem_bytes)
            if need > d.mem_bytes:
                raise InfeasibleOOM(job.job_id, d.device_id, need - d.mem_bytes)
        else:
            k = cfg.group_size(cluster)
            devs = cluster.devices[:k]
            d = min(devs, key=lambda d: d.mem_bytes)
            stages_or_oom(job, k, d.device_id, d.mem_bytes)
    except InfeasibleError as exc:
        return Feasibility(False, str(exc), getattr(exc, "deficit_bytes", 0))
    return Feasibility(True)


__all__ = [
    "KINDS", "PRECONDITIONS", "StrategyConfig", "Plan", "Feasibility", "JobProgress", "SharpScheduler",
    "GroupScheduler", "sharp_next_task", "build_sharp", "build_task_parallel", "build_model_parallel",
    "build_pipeline_parallel", "build_hybrid", "build_plan", "run_strategy", "check_feasible",
    "exact_optimal", "exact_trace", "lower_bounds", "fold_tasks", "lrtf_reduced", "TaskSpec",
    "TaskInstance", "ScheduledTask", "spill_partitionings", "spill_estimate", "split_for_devices",
    "min_stage_footprint",
]
