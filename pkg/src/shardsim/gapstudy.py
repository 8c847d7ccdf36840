"""Sharded-LRTF against the exact optimum on random tiny instances."""

from __future__ import annotations

import random
import statistics
from dataclasses import dataclass

from .strategies.exact import MAX_DEVICES, TaskInstance, TaskSpec, exact_optimal, lower_bounds, lrtf_reduced


def random_instance(rng: random.Random, max_tasks: int = 10, max_devices: int = MAX_DEVICES,
                    max_jobs: int = 4, max_duration: int = 10) -> TaskInstance:
    n_tasks = rng.randint(1, max_tasks)
    n_jobs = rng.randint(1, min(max_jobs, n_tasks))
    # every job gets one task, the rest are spread at random
    lengths = [1] * n_jobs
    for _ in range(n_tasks - n_jobs):
        lengths[rng.randrange(n_jobs)] += 1
    tasks, tid = [], 0
    for j, length in enumerate(lengths):
        pred = None
        for _ in range(length):
            tasks.append(TaskSpec(tid, f"job{j}", float(rng.randint(1, max_duration)), pred))
            pred = tid
            tid += 1
    return TaskInstance(tuple(tasks), rng.randint(1, max_devices))


@dataclass(frozen=True)
class GapRow:
    index: int
    n_tasks: int
    n_jobs: int
    devices: int
    optimal_s: float
    lrtf_s: float
    bound_s: float

    @property
    def ratio(self) -> float:
        return self.lrtf_s / self.optimal_s


def evaluate(instance: TaskInstance, index: int = 0) -> GapRow:
    opt, _ = exact_optimal(instance)
    lrtf = lrtf_reduced(instance).makespan
    return GapRow(index, len(instance.tasks), len(instance.chains()), instance.devices,
                  opt, lrtf, max(lower_bounds(instance)))


def gap_study(n: int, seed: int = 0, max_tasks: int = 10) -> list[GapRow]:
    rng = random.Random(seed)
    return [evaluate(random_instance(rng, max_tasks=max_tasks), i) for i in range(n)]


def summarize_gaps(rows: list[GapRow], threshold: float = 1.25) -> dict:
    ratios = [r.ratio for r in rows]
    if not ratios:
        return {"instances": 0}
    qs = statistics.quantiles(ratios, n=20, method="inclusive") if len(ratios) > 1 else [ratios[0]] * 19
    return {
        "instances": len(ratios),
        "min": min(ratios),
        "mean": statistics.fmean(ratios),
        "median": statistics.median(ratios),
        "p95": qs[18],
        "max": max(ratios),
        "optimal_fraction": sum(r <= 1 + 1e-12 for r in ratios) / len(ratios),
        "within_threshold_fraction": sum(r <= threshold for r in ratios) / len(ratios),
        "threshold": threshold,
    }
