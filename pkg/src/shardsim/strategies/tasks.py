"""Compile jobs into ShardTask graphs."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

from ..engine import Direction, ShardTask
from ..errors import InfeasibleOOM
from ..model import ModelJob, ModelProfile
from ..partition import Partitioning

F, B = Direction.FORWARD, Direction.BACKWARD


def spilled_tasks(job: ModelJob, part: Partitioning, ids: Iterator[int]) -> list[ShardTask]:
    """Single-chain spilled execution with shard-boundary checkpointing.

    Backward tasks recompute their shard's forward before running backward,
    restore the input checkpoint from host DRAM and offload parameter
    gradients afterwards. The last shard is the exception: its backward must
    directly follow its forward on the same device (schedulers enforce this),
    so it skips the recompute. Minibatches chain back to back.
    """
    shards = part.shards
    n = len(shards)
    if n == 1:
        return _unsharded_tasks(job, shards[0], ids)
    out: list[ShardTask] = []
    prev = None
    for mb in range(job.n_minibatches):
        fwd_ids = {}
        for s in shards:
            i = s.shard_index
            tid = next(ids)
            out.append(ShardTask(
                tid, job.job_id, mb, i, F,
                compute_s=s.fwd_compute_s,
                param_load_bytes=s.param_bytes,
                activation_in_bytes=shards[i - 1].boundary_activation_bytes if i else 0,
                # the last shard's output only feeds the loss
                activation_out_bytes=s.boundary_activation_bytes if i < n - 1 else 0,
                pred=prev,
            ))
            fwd_ids[i] = prev = tid
        for s in reversed(shards):
            i = s.shard_index
            tid = next(ids)
            in_ckpt = shards[i - 1].boundary_activation_bytes if i else 0
            out.append(ShardTask(
                tid, job.job_id, mb, i, B,
                # the last shard turns around on the device that just ran its
                # forward, with activations still resident: nothing to recompute
                compute_s=s.bwd_compute_s if i == n - 1 else s.fwd_compute_s + s.bwd_compute_s,
                param_load_bytes=s.param_bytes,
                activation_in_bytes=s.boundary_activation_bytes if i < n - 1 else 0,
                activation_out_bytes=in_ckpt,
                checkpoint_in_bytes=in_ckpt,
                checkpoint_src=fwd_ids[i - 1] if i else None,
                grad_offload_bytes=s.param_bytes,
                pred=prev,
            ))
            prev = tid
    return out


def _unsharded_tasks(job: ModelJob, shard, ids: Iterator[int]) -> list[ShardTask]:
    """A model that fits whole stays on its device: one parameter load, no spilling."""
    out: list[ShardTask] = []
    prev = None
    for mb in range(job.n_minibatches):
        for d, compute in ((F, shard.fwd_compute_s), (B, shard.bwd_compute_s)):
            tid = next(ids)
            out.append(ShardTask(tid, job.job_id, mb, 0, d, compute_s=compute,
                                 param_load_bytes=shard.param_bytes if prev is None else 0,
                                 pred=prev, spill=False))
            prev = tid
    return out


@dataclass(frozen=True)
class Stage:
    start: int
    end: int
    param_bytes: int
    boundary_activation_bytes: int
    fwd_compute_s: float
    bwd_compute_s: float
    footprint: int


def make_stages(model: ModelProfile, bounds: Sequence[tuple[int, int]]) -> list[Stage]:
    out = []
    for a, b in bounds:
        layers = model.layers[a:b]
        out.append(Stage(
            a, b,
            param_bytes=sum(l.param_bytes for l in layers),
            boundary_activation_bytes=layers[-1].activation_out_bytes,
            fwd_compute_s=math.fsum(l.fwd_compute_s for l in layers),
            bwd_compute_s=math.fsum(l.bwd_compute_s for l in layers),
            footprint=sum(l.pilot_footprint for l in layers),
        ))
    return out


def _linear_partition(cost: Sequence[float], k: int, fits) -> list[tuple[int, int]] | None:
    """Contiguous k-way split minimising the largest part cost, subject to fits(a, b)."""
    n = len(cost)
    prefix = [0.0]
    for c in cost:
        prefix.append(prefix[-1] + c)
    inf = math.inf
    best = [[inf] * (n + 1) for _ in range(k + 1)]
    arg = [[-1] * (n + 1) for _ in range(k + 1)]
    best[0][0] = 0.0
    for parts in range(1, k + 1):
        for end in range(parts, n + 1):
            for start in range(parts - 1, end):
                if best[parts - 1][start] == inf or not fits(start, end):
                    continue
                val = max(best[parts - 1][start], prefix[end] - prefix[start])
                if val < best[parts][end]:
                    best[parts][end] = val
                    arg[parts][end] = start
    if best[k][n] == inf:
        return None
    bounds = []
    end = n
    for parts in range(k, 0, -1):
        start = arg[parts][end]
        bounds.append((start, end))
        end = start
    return bounds[::-1]


def split_for_devices(model: ModelProfile, k: int, mem_bytes: int) -> list[tuple[int, int]] | None:
    """Balanced contiguous split into min(k, layers) stages that each fit ``mem_bytes``."""
    k = min(k, model.n_layers)
    fp_prefix = list(itertools.accumulate((l.pilot_footprint for l in model.layers), initial=0))
    limit = mem_bytes - model.input_batch_bytes
    cost = [l.fwd_compute_s + l.bwd_compute_s for l in model.layers]
    return _linear_partition(cost, k, lambda a, b: fp_prefix[b] - fp_prefix[a] <= limit)


def min_stage_footprint(model: ModelProfile, k: int) -> int:
    """Smallest achievable largest-stage footprint over contiguous k-way splits."""
    k = min(k, model.n_layers)
    fps = [l.pilot_footprint for l in model.layers]
    bounds = _linear_partition(fps, k, lambda a, b: True)
    return max(sum(fps[a:b]) for a, b in bounds)


def stages_or_oom(job: ModelJob, k: int, device_id: str, mem_bytes: int) -> list[Stage]:
    bounds = split_for_devices(job.model, k, mem_bytes)
    if bounds is None:
        need = min_stage_footprint(job.model, k) + job.model.input_batch_bytes
        raise InfeasibleOOM(job.job_id, device_id, need - mem_bytes)
    return make_stages(job.model, bounds)


def resident_tasks(job: ModelJob, stages: Sequence[Stage], ids: Iterator[int],
                   microbatches: int = 1) -> list[ShardTask]:
    """Stage-pinned execution with weights resident on their device.

    Each stage loads its parameters once. Activations move stage to stage;
    backward does not recompute. With microbatches > 1 the backward pass of a
    minibatch waits for every forward microbatch (pipeline flush).
    """
    k = len(stages)
    m = microbatches
    out: list[ShardTask] = []
    prev_bwd: tuple[int, ...] = ()
    for mb in range(job.n_minibatches):
        fwd = {}
        for i in range(m):
            for s, st in enumerate(stages):
                tid = next(ids)
                out.append(ShardTask(
                    tid, job.job_id, mb, s, F,
                    compute_s=st.fwd_compute_s / m,
                    param_load_bytes=st.param_bytes if mb == 0 and i == 0 else 0,
                    activation_in_bytes=stages[s - 1].boundary_activation_bytes // m if s else 0,
                    activation_out_bytes=st.boundary_activation_bytes // m if s < k - 1 else 0,
                    pred=fwd[i, s - 1] if s else None,
                    after=prev_bwd if s == 0 else (),
                    spill=False,
                    microbatch_index=i,
                ))
                fwd[i, s] = tid
        all_fwd = tuple(fwd.values())
        bwd = {}
        for i in range(m):
            for s in reversed(range(k)):
                st = stages[s]
                tid = next(ids)
                pred = bwd[i, s + 1] if s < k - 1 else fwd[i, k - 1]
                after = tuple(f for f in all_fwd if f != pred) if (s == k - 1 and m > 1) else ()
                out.append(ShardTask(
                    tid, job.job_id, mb, s, B,
                    compute_s=st.bwd_compute_s / m,
                    activation_in_bytes=st.boundary_activation_bytes // m if s < k - 1 else 0,
                    activation_out_bytes=stages[s - 1].boundary_activation_bytes // m if s else 0,
                    pred=pred,
                    after=after,
                    spill=False,
                    microbatch_index=i,
                ))
                bwd[i, s] = tid
        prev_bwd = tuple(bwd.values())
    return out
