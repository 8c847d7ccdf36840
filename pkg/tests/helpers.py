import itertools

from shardsim.engine import BaseScheduler, Direction, ShardTask
from shardsim.model import LayerProfile, ModelJob, ModelProfile


class InOrder(BaseScheduler):
    """Takes the lowest-id candidate; enough for single-chain timelines."""

    def __init__(self, tasks):
        self._tasks = list(tasks)

    def tasks(self):
        return self._tasks

    def select(self, device_id, candidates, now):
        return candidates[0] if candidates else None


class Never(InOrder):
    def select(self, device_id, candidates, now):
        return None


def forward_chain(loads_bytes, computes, job="a", start_id=0):
    tasks, pred = [], None
    for i, (ld, c) in enumerate(zip(loads_bytes, computes)):
        t = ShardTask(start_id + i, job, 0, i, Direction.FORWARD, compute_s=c, param_load_bytes=ld, pred=pred)
        tasks.append(t)
        pred = t.task_id
    return tasks


def random_jobs(draw_int, n_jobs, max_layers=5, max_minibatches=2, prefix="j"):
    """Small random spilled workloads from an integer source ``draw_int(lo, hi)``."""
    jobs = []
    for j in range(n_jobs):
        layers = tuple(LayerProfile(draw_int(1, 400), draw_int(0, 60), draw_int(1, 20) / 4,
                                    workspace_bytes=draw_int(0, 50))
                       for _ in range(draw_int(1, max_layers)))
        jobs.append(ModelJob(f"{prefix}{j}", ModelProfile(f"m{j}", layers, draw_int(0, 20)),
                             minibatches_per_epoch=draw_int(1, max_minibatches)))
    return jobs


ids = itertools.count
