"""Job-per-device-group execution: task, model, pipeline and hybrid parallelism.

Devices are split into fixed groups; a group trains one job at a time with the
job's stage ``s`` pinned to the group's ``s``-th device. When a group frees up,
its first device claims the unstarted job with the longest total time.
"""

from __future__ import annotations

from typing import Mapping, Sequence

from ..engine import BaseScheduler, ShardTask


class GroupScheduler(BaseScheduler):
    def __init__(self, job_tasks: Mapping[str, Sequence[ShardTask]], groups: Sequence[Sequence[str]],
                 job_total_s: Mapping[str, float]):
        self._tasks = [t for ts in job_tasks.values() for t in ts]
        self.groups = [tuple(g) for g in groups]
        self.position = {dev: (g, pos) for g, devs in enumerate(self.groups) for pos, dev in enumerate(devs)}
        self.bound: list[str | None] = [None] * len(self.groups)
        self.left = {job: len(ts) for job, ts in job_tasks.items()}
        self.first_task = {job: ts[0].task_id for job, ts in job_tasks.items()}
        self.queue = sorted(job_tasks, key=lambda j: (-job_total_s[j], j))
        self.assignment: dict[str, int] = {}

    def tasks(self):
        return self._tasks

    def select(self, device_id, candidates, now):
        if device_id not in self.position:
            return None
        g, pos = self.position[device_id]
        job = self.bound[g]
        if job is None:
            if pos != 0 or not self.queue:
                return None
            ready = {t.task_id: t for t in candidates}
            for j in self.queue:
                if self.first_task[j] in ready:
                    self.queue.remove(j)
                    self.bound[g] = j
                    self.assignment[j] = g
                    return ready[self.first_task[j]]
            return None
        for t in candidates:
            if t.job_id == job and t.shard_index == pos:
                return t
        return None

    def on_complete(self, task, device_id, now):
        self.left[task.job_id] -= 1
        if self.left[task.job_id] == 0:
            g = self.assignment[task.job_id]
            self.bound[g] = None
