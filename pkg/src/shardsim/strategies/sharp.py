"""Shard-alternating execution driven by a sharded longest-remaining-time-first policy."""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from ..engine import BaseScheduler, Direction, ShardTask


@dataclass
class JobProgress:
    job_id: str
    remaining: deque
    remaining_time_estimate_s: float
    running_on: str | None = None
    head_ready: bool = False
    # suffix sums of per-task estimates; exact, so identical jobs stay tied
    _suffix: list[float] = field(default_factory=list, repr=False)
    _in_flight: int = 0


def sharp_next_task(free_device: str, progress: Iterable[JobProgress]) -> ShardTask | None:
    """Next task for ``free_device``: the ready job with the most estimated work left.

    A job is ready when its next task can start here: nothing of it is running
    on another device and its chain predecessor is done (or queued on this
    same device). Ties go to the smaller job_id.
    """
    eligible = [p for p in progress
                if p.remaining and p.head_ready and p.running_on in (None, free_device)]
    if not eligible:
        return None
    best = min(eligible, key=lambda p: (-p.remaining_time_estimate_s, p.job_id))
    return best.remaining[0]


class SharpScheduler(BaseScheduler):
    def __init__(self, job_tasks: Mapping[str, Sequence[ShardTask]], estimate: Callable[[ShardTask], float]):
        self._tasks = [t for ts in job_tasks.values() for t in ts]
        self.progress: dict[str, JobProgress] = {}
        for job_id, tasks in job_tasks.items():
            est = [estimate(t) for t in tasks]
            suffix = list(itertools.accumulate(reversed(est), initial=0.0))[::-1]
            self.progress[job_id] = JobProgress(job_id, deque(tasks), suffix[0], _suffix=suffix)
        # unsharded jobs stay resident where they start, like whole-job placement
        self.unsharded = {job for job, ts in job_tasks.items()
                          if len(ts) > 1 and all(t.shard_index == 0 and not t.spill for t in ts)}
        self.pinned_on: dict[str, str] = {}
        self.device_load: dict[str, int] = {}
        self.last_dispatched: dict[str, ShardTask] = {}
        self.estimate_history: dict[str, list[float]] = {j: [p.remaining_time_estimate_s]
                                                          for j, p in self.progress.items()}

    def tasks(self):
        return self._tasks

    def select(self, device_id, candidates, now):
        pinned = self.pinned_on.get(device_id)
        if pinned is not None:
            head = self.progress[pinned].remaining[0]
            return head if any(t.task_id == head.task_id for t in candidates) else None
        last = self.last_dispatched.get(device_id)
        if last is not None and last.direction is Direction.FORWARD:
            # forward -> backward turnaround of the last shard stays put
            for t in candidates:
                if t.pred == last.task_id and t.direction is Direction.BACKWARD:
                    return t
        ready = {t.task_id for t in candidates}
        busy = self.device_load.get(device_id, 0) > 0
        for p in self.progress.values():
            p.head_ready = bool(p.remaining) and p.remaining[0].task_id in ready
            # binding a whole job to a busy device could strand it while another device idles
            if busy and p.job_id in self.unsharded and p.running_on is None:
                p.head_ready = False
        return sharp_next_task(device_id, self.progress.values())

    def on_dispatch(self, task, device_id, now):
        p = self.progress[task.job_id]
        if p.remaining[0].task_id != task.task_id:
            raise RuntimeError(f"job {task.job_id} dispatched out of chain order")
        p.remaining.popleft()
        self.last_dispatched[device_id] = task
        p.remaining_time_estimate_s = p._suffix[len(p._suffix) - 1 - len(p.remaining)]
        p.running_on = device_id
        p._in_flight += 1
        self.device_load[device_id] = self.device_load.get(device_id, 0) + 1
        if task.job_id in self.unsharded:
            if p.remaining:
                self.pinned_on[device_id] = task.job_id
            else:
                self.pinned_on.pop(device_id, None)
        self.estimate_history[task.job_id].append(p.remaining_time_estimate_s)

    def on_complete(self, task, device_id, now):
        p = self.progress[task.job_id]
        p._in_flight -= 1
        self.device_load[device_id] -= 1
        if p._in_flight == 0 and not (task.job_id in self.unsharded and p.remaining):
            p.running_on = None
