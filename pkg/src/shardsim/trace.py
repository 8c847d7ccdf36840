"""Simulation trace records, invariant checks and Chrome trace-event export."""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Iterable

if TYPE_CHECKING:
    from .engine import ShardTask


class EventKind(str, Enum):
    PARAM_LOAD = "ParamLoad"
    ACT_PROMOTE = "ActPromote"
    ACT_DEMOTE = "ActDemote"
    GRAD_OFFLOAD = "GradOffload"
    PEER_COPY = "PeerCopy"
    COMPUTE = "Compute"
    IDLE = "Idle"
    FLUSH = "Flush"


@dataclass(frozen=True)
class TraceEvent:
    resource: str  # "<device>/compute", "<device>/h2d", "host/d2h", ...
    kind: EventKind
    task_id: int | None
    start_s: float
    end_s: float

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


class TraceInvariantError(AssertionError):
    pass


@dataclass
class SimTrace:
    events: list[TraceEvent]
    tasks: dict[int, "ShardTask"]
    placement: dict[int, str]  # task_id -> device_id
    device_ids: tuple[str, ...]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.events.sort(key=lambda e: (e.start_s, e.resource, e.end_s, -1 if e.task_id is None else e.task_id))

    @property
    def makespan(self) -> float:
        return max((e.end_s for e in self.events), default=0.0)

    def compute_events(self, device_id: str | None = None) -> list[TraceEvent]:
        out = [e for e in self.events if e.kind is EventKind.COMPUTE]
        if device_id is not None:
            res = f"{device_id}/compute"
            out = [e for e in out if e.resource == res]
        return out

    def by_resource(self) -> dict[str, list[TraceEvent]]:
        groups: dict[str, list[TraceEvent]] = defaultdict(list)
        for e in self.events:
            groups[e.resource].append(e)
        return dict(groups)

    def busy_s(self, device_id: str) -> float:
        return math.fsum(e.duration_s for e in self.compute_events(device_id))

    def task_compute_interval(self) -> dict[int, TraceEvent]:
        return {e.task_id: e for e in self.compute_events()}

    def job_completion_s(self) -> dict[str, float]:
        done: dict[str, float] = {}
        for e in self.compute_events():
            job = self.tasks[e.task_id].job_id
            done[job] = max(done.get(job, 0.0), e.end_s)
        return dict(sorted(done.items()))

    def expected_compute_s(self) -> float | None:
        """Sum of task compute times scaled by the device each task ran on."""
        scale = self.meta.get("compute_scale")
        if scale is None:
            return None
        return math.fsum(t.compute_s * scale[self.placement[tid]] for tid, t in self.tasks.items())

    def check_invariants(self, expected_compute_s: float | None = None, rel_tol: float = 1e-9) -> None:
        """Raise TraceInvariantError on overlap, misordered chains or lost work."""
        for res, evs in self.by_resource().items():
            evs = sorted(evs, key=lambda e: (e.start_s, e.end_s))
            for e in evs:
                if e.end_s < e.start_s:
                    raise TraceInvariantError(f"{res}: negative interval {e}")
            for a, b in zip(evs, evs[1:]):
                if b.start_s < a.end_s - 1e-12 * max(1.0, a.end_s):
                    raise TraceInvariantError(f"{res}: {a} overlaps {b}")

        compute = self.task_compute_interval()
        missing = set(self.tasks) - set(compute)
        if missing:
            raise TraceInvariantError(f"tasks never computed: {sorted(missing)[:10]}")
        for tid, task in self.tasks.items():
            ev = compute[tid]
            deps = ([task.pred] if task.pred is not None else []) + list(task.after)
            for d in deps:
                if compute[d].end_s > ev.start_s + 1e-12 * max(1.0, ev.start_s):
                    raise TraceInvariantError(f"task {tid} started before dependency {d} finished")

        # forward shards ascending, then backward shards descending, per chain
        chains: dict[tuple, list] = defaultdict(list)
        for tid, task in self.tasks.items():
            chains[(task.job_id, task.minibatch_index, task.microbatch_index)].append(task)
        for key, chain in chains.items():
            chain.sort(key=lambda t: compute[t.task_id].start_s)
            order = [(t.direction.value, t.shard_index) for t in chain]
            fwd = [s for d, s in order if d == "F"]
            bwd = [s for d, s in order if d == "B"]
            if order != [("F", s) for s in fwd] + [("B", s) for s in bwd]:
                raise TraceInvariantError(f"chain {key}: backward started before forward finished")
            if fwd != sorted(fwd) or bwd != sorted(bwd, reverse=True):
                raise TraceInvariantError(f"chain {key}: shard order violated {order}")

        if expected_compute_s is None:
            expected_compute_s = self.expected_compute_s()
        if expected_compute_s is not None:
            total = math.fsum(e.duration_s for e in compute.values())
            if not math.isclose(total, expected_compute_s, rel_tol=rel_tol, abs_tol=1e-12):
                raise TraceInvariantError(f"compute not conserved: {total} != {expected_compute_s}")

    def to_chrome(self) -> list[dict]:
        return chrome_events(self.events, self.tasks, self.device_ids)

    def to_chrome_json(self) -> str:
        return json.dumps({"traceEvents": self.to_chrome(), "displayTimeUnit": "ms"},
                          sort_keys=True, separators=(",", ":")) + "\n"


def _task_label(task) -> str:
    if task is None:
        return ""
    label = f"{task.job_id}_{task.shard_index}{task.direction.value}"
    if task.microbatch_index:
        label += f"_m{task.microbatch_index}"
    return f"{label}@mb{task.minibatch_index}"


def chrome_events(events: Iterable[TraceEvent], tasks: dict, device_ids: tuple[str, ...]) -> list[dict]:
    """Complete ("X") events; pid per device, tid per lane; timestamps in µs."""
    pids = {d: i for i, d in enumerate(device_ids)}
    host_pid = len(device_ids)
    lanes: dict[tuple[int, str], int] = {}
    out: list[dict] = []
    for d, pid in pids.items():
        out.append({"name": "process_name", "ph": "M", "pid": pid, "tid": 0, "args": {"name": d}})
    out.append({"name": "process_name", "ph": "M", "pid": host_pid, "tid": 0, "args": {"name": "host"}})

    for e in events:
        owner, _, lane = e.resource.partition("/")
        pid = pids.get(owner, host_pid)
        key = (pid, lane)
        if key not in lanes:
            lanes[key] = sum(1 for k in lanes if k[0] == pid)
            out.append({"name": "thread_name", "ph": "M", "pid": pid, "tid": lanes[key],
                        "args": {"name": lane}})
        task = tasks.get(e.task_id) if e.task_id is not None else None
        out.append({
            "name": f"{e.kind.value} {_task_label(task)}".strip(),
            "cat": e.kind.value,
            "ph": "X",
            "ts": round(e.start_s * 1e6, 3),
            "dur": round(e.duration_s * 1e6, 3),
            "pid": pid,
            "tid": lanes[key],
        })
    return out
