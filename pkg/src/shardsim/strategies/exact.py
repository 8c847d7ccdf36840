"""Exact makespan minimisation for tiny chain-scheduling instances.

The reduced cost model: identical devices, each task a fixed duration
(compute plus its transfers, no overlap), chains of tasks per job, no
preemption. Any schedule is reproduced (or beaten) by taking its tasks in
start-time order and placing each as early as possible on its device, so a
search over (next job, device) choices with memoisation on the resulting state
is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

from ..engine import EngineOptions, ShardTask, run, transfer_time
from ..errors import InstanceTooLarge
from ..model import ClusterSpec, DeviceSpec, InterconnectSpec
from .sharp import SharpScheduler

MAX_TASKS = 12
MAX_DEVICES = 3


@dataclass(frozen=True)
class TaskSpec:
    task_id: int
    job_id: str
    duration_s: float
    pred: int | None = None

    def __post_init__(self):
        if not self.duration_s > 0:
            raise ValueError(f"task {self.task_id}: duration must be > 0")


@dataclass(frozen=True)
class TaskInstance:
    tasks: tuple[TaskSpec, ...]
    devices: int

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))
        if self.devices < 1:
            raise ValueError("need at least one device")
        ids = {t.task_id for t in self.tasks}
        if len(ids) != len(self.tasks):
            raise ValueError("duplicate task ids")
        succ_count: dict[int, int] = {}
        for t in self.tasks:
            if t.pred is not None:
                if t.pred not in ids:
                    raise ValueError(f"unknown predecessor {t.pred}")
                succ_count[t.pred] = succ_count.get(t.pred, 0) + 1
        if any(c > 1 for c in succ_count.values()):
            raise ValueError("precedence must be a union of chains")

    @property
    def big_m(self) -> float:
        return math.fsum(t.duration_s for t in self.tasks)

    def chains(self) -> list[list[TaskSpec]]:
        by_id = {t.task_id: t for t in self.tasks}
        nxt = {t.pred: t for t in self.tasks if t.pred is not None}
        heads = [t for t in self.tasks if t.pred is None]
        out = []
        for h in sorted(heads, key=lambda t: t.task_id):
            chain = [h]
            while chain[-1].task_id in nxt:
                chain.append(nxt[chain[-1].task_id])
            out.append(chain)
        if sum(map(len, out)) != len(by_id):
            raise ValueError("precedence contains a cycle")
        return out


@dataclass(frozen=True)
class ScheduledTask:
    task_id: int
    device: int
    start_s: float
    end_s: float


def exact_optimal(instance: TaskInstance) -> tuple[float, list[ScheduledTask]]:
    n, m = len(instance.tasks), instance.devices
    if n > MAX_TASKS or m > MAX_DEVICES:
        raise InstanceTooLarge(f"{n} tasks on {m} devices exceeds {MAX_TASKS} tasks / {MAX_DEVICES} devices")
    if n == 0:
        return 0.0, []
    chains = instance.chains()
    durs = [tuple(t.duration_s for t in c) for c in chains]
    k = len(chains)

    @lru_cache(maxsize=None)
    def solve(progress: tuple, free: tuple, ready: tuple) -> tuple[float, tuple]:
        # state is relative to the earliest free device; the answer shifts with it
        if all(progress[j] == len(durs[j]) for j in range(k)):
            return max(free), ()
        best, best_plan = math.inf, ()
        for j in range(k):
            i = progress[j]
            if i == len(durs[j]):
                continue
            # of the devices free before the chain is ready, keeping the earlier ones is never worse
            early = [f for f in free if f <= ready[j]]
            choices = ([max(early)] if early else []) + sorted({f for f in free if f > ready[j]})
            for f in choices:
                g = free.index(f)
                start = max(f, ready[j])
                end = start + durs[j][i]
                nfree = sorted(free[:g] + (end,) + free[g + 1:])
                base = nfree[0]
                nprog = progress[:j] + (i + 1,) + progress[j + 1:]
                nready = tuple(0.0 if nprog[x] == len(durs[x]) else max(r, base) - base
                               for x, r in enumerate(ready[:j] + (end,) + ready[j + 1:]))
                val, plan = solve(nprog, tuple(v - base for v in nfree), nready)
                val += base
                if val < best:
                    best = val
                    best_plan = ((j, f, start, end, base),) + plan
        return best, best_plan

    makespan, plan = solve((0,) * k, (0.0,) * m, (0.0,) * k)
    solve.cache_clear()

    # replay the plan; each step is stored relative to the state it was taken in
    schedule = []
    free = [0.0] * m
    pos = [0] * k
    offset = 0.0
    for j, f, start, end, base in plan:
        g = min(range(m), key=lambda x: (abs(free[x] - (f + offset)), x))
        free[g] = end + offset
        schedule.append(ScheduledTask(chains[j][pos[j]].task_id, g, start + offset, end + offset))
        pos[j] += 1
        offset += base
    return makespan, schedule


def lower_bounds(instance: TaskInstance) -> tuple[float, float]:
    """(total work / devices, longest chain); both bound any makespan from below."""
    work = math.fsum(t.duration_s for t in instance.tasks)
    longest = max((math.fsum(t.duration_s for t in c) for c in instance.chains()), default=0.0)
    return work / instance.devices, longest


def fold_tasks(tasks: Sequence[ShardTask], link: InterconnectSpec) -> TaskInstance:
    """Reduce spilled chains to fixed durations: compute plus every transfer, serialised.

    ``devices`` is left at 1; callers replace it.
    """
    specs = []
    for t in tasks:
        moved = t.param_load_bytes + t.activation_in_bytes + t.checkpoint_in_bytes
        out = t.activation_out_bytes + t.grad_offload_bytes
        dur = t.compute_s + transfer_time(moved, link) + transfer_time(out, link)
        specs.append(TaskSpec(t.task_id, t.job_id, dur, t.pred))
    return TaskInstance(tuple(specs), 1)


def reduced_cluster(devices: int) -> ClusterSpec:
    """Identical devices with free transfers, for running heuristics on folded instances."""
    devs = tuple(DeviceSpec(f"gpu{i}", mem_bytes=1) for i in range(devices))
    return ClusterSpec(devs, host_dram_bytes=1, h2d=InterconnectSpec("host-to-device", math.inf))


def as_shard_tasks(instance: TaskInstance) -> dict[str, list[ShardTask]]:
    from ..engine import Direction

    jobs: dict[str, list[ShardTask]] = {}
    for chain in instance.chains():
        if chain[0].job_id in jobs or any(t.job_id != chain[0].job_id for t in chain):
            raise ValueError("each job must own exactly one chain")
        for pos, t in enumerate(chain):
            jobs.setdefault(t.job_id, []).append(ShardTask(
                t.task_id, t.job_id, 0, pos, Direction.FORWARD, compute_s=t.duration_s, pred=t.pred))
    return jobs


def lrtf_reduced(instance: TaskInstance):
    """Sharded-LRTF on the reduced model (no double buffering); returns the trace."""
    jobs = as_shard_tasks(instance)
    sched = SharpScheduler(jobs, estimate=lambda t: t.compute_s)
    return run(reduced_cluster(instance.devices), sched, EngineOptions(double_buffer=False))
