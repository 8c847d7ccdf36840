"""Deterministic discrete-event simulator for shard execution.

Each device has a compute lane and a small queue of dispatched tasks: the one
computing plus, with double buffering, one prefetched task whose parameters and
inputs stream in while the current task computes. Transfers run on FIFO
channels: per-device host links (or one shared host link), and optionally a
device-to-device fabric. A scheduler object decides which ready task a device
takes whenever it has a free queue slot.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Protocol, Sequence

from .errors import BufferOverflow, DeadlockError
from .model import ClusterSpec, DeviceSpec, InterconnectSpec
from .trace import EventKind, SimTrace, TraceEvent


class Direction(str, Enum):
    FORWARD = "F"
    BACKWARD = "B"


@dataclass(frozen=True)
class ShardTask:
    """Atomic unit of device work.

    ``pred`` is the chain predecessor whose output this task consumes;
    ``after`` lists extra barrier dependencies (pipeline flushes, minibatch
    synchronisation). ``spill`` tasks keep their outputs in host DRAM: outputs
    are demoted after compute and promoted by the consumer. Non-spill tasks
    hand outputs device to device.
    """

    task_id: int
    job_id: str
    minibatch_index: int
    shard_index: int
    direction: Direction
    compute_s: float
    param_load_bytes: int = 0
    activation_in_bytes: int = 0
    activation_out_bytes: int = 0
    grad_offload_bytes: int = 0
    checkpoint_in_bytes: int = 0
    checkpoint_src: int | None = None
    pred: int | None = None
    after: tuple[int, ...] = ()
    spill: bool = True
    microbatch_index: int = 0

    def __post_init__(self):
        if self.compute_s < 0 or not math.isfinite(self.compute_s):
            raise ValueError(f"task {self.task_id}: bad compute_s {self.compute_s}")


def transfer_time(nbytes: int, link: InterconnectSpec, elided: bool = False) -> float:
    if elided or nbytes == 0:
        return 0.0
    if nbytes < 0:
        raise ValueError("nbytes must be >= 0")
    return link.latency_s + nbytes / link.bandwidth_Bps


class Scheduler(Protocol):
    def tasks(self) -> Sequence[ShardTask]: ...

    def select(self, device_id: str, candidates: Sequence[ShardTask], now: float) -> ShardTask | None: ...

    def on_dispatch(self, task: ShardTask, device_id: str, now: float) -> None: ...

    def on_complete(self, task: ShardTask, device_id: str, now: float) -> None: ...


class BaseScheduler:
    """Hook defaults; subclasses provide tasks() and select()."""

    def on_dispatch(self, task, device_id, now):
        pass

    def on_complete(self, task, device_id, now):
        pass


@dataclass(frozen=True)
class EngineOptions:
    double_buffer: bool = True
    prefetch_depth: int = 1
    duplex: bool | None = None  # None: take from the cluster's host link
    shared: bool | None = None
    buffer_bytes: int | None = None  # prefetch buffer size; None skips the check

    def __post_init__(self):
        if self.prefetch_depth < 1:
            raise ValueError("prefetch_depth must be >= 1")


class _Channel:
    __slots__ = ("sim", "rid", "link", "busy", "queue")

    def __init__(self, sim: "_Sim", rid: str, link: InterconnectSpec):
        self.sim = sim
        self.rid = rid
        self.link = link
        self.busy = False
        self.queue: deque = deque()

    def submit(self, nbytes: int, kind: EventKind, task_id: int, on_done: Callable[[], None]) -> None:
        dur = transfer_time(nbytes, self.link)
        if dur == 0.0:
            on_done()
            return
        if self.busy:
            self.queue.append((dur, kind, task_id, on_done))
        else:
            self._start(dur, kind, task_id, on_done)

    def _start(self, dur, kind, task_id, on_done):
        now = self.sim.now
        self.busy = True
        self.sim.record(TraceEvent(self.rid, kind, task_id, now, now + dur))
        self.sim.at(now + dur, self._finish, on_done)

    def _finish(self, on_done):
        self.busy = False
        if self.queue:
            self._start(*self.queue.popleft())
        on_done()


class _Slot:
    __slots__ = ("task", "pending", "staged")

    def __init__(self, task: ShardTask):
        self.task = task
        self.pending = 1  # guard released once all staging ops are submitted
        self.staged = False


class _Device:
    __slots__ = ("spec", "slots", "running", "last_task", "down", "up", "peer_in")

    def __init__(self, spec: DeviceSpec):
        self.spec = spec
        self.slots: deque[_Slot] = deque()
        self.running: _Slot | None = None
        self.last_task: ShardTask | None = None


class _Sim:
    def __init__(self, cluster: ClusterSpec, scheduler: Scheduler, options: EngineOptions):
        self.cluster = cluster
        self.scheduler = scheduler
        self.options = options
        self.capacity = 1 + (options.prefetch_depth if options.double_buffer else 0)
        self.now = 0.0
        self._heap: list = []
        self._seq = 0
        self.events: list[TraceEvent] = []

        self.tasks = {t.task_id: t for t in scheduler.tasks()}
        if len(self.tasks) != len(scheduler.tasks()):
            raise ValueError("duplicate task ids")
        self.children: dict[int, list[int]] = {tid: [] for tid in self.tasks}
        self.unmet_after: dict[int, int] = {}
        for t in self.tasks.values():
            self.unmet_after[t.task_id] = len(t.after)
            for dep in ([t.pred] if t.pred is not None else []) + list(t.after):
                if dep not in self.tasks:
                    raise ValueError(f"task {t.task_id} depends on unknown task {dep}")
                self.children[dep].append(t.task_id)
            if t.checkpoint_src is not None and t.checkpoint_src not in self.tasks:
                raise ValueError(f"task {t.task_id} restores unknown checkpoint {t.checkpoint_src}")

        self.complete: set[int] = set()
        self.dispatched: set[int] = set()
        self.placement: dict[int, str] = {}
        self.ready: set[int] = {tid for tid, t in self.tasks.items()
                                if t.pred is None and not t.after}
        self.prefetchable: dict[str, set[int]] = {d.device_id: set() for d in cluster.devices}
        self.host_ready: set[int] = set()
        self.waiters: dict[int, list[Callable[[], None]]] = {}

        self._build_channels()

    # -- infrastructure ---------------------------------------------------
    def _build_channels(self):
        h2d = self.cluster.h2d
        duplex = h2d.duplex if self.options.duplex is None else self.options.duplex
        shared = h2d.shared if self.options.shared is None else self.options.shared
        self.devices = [_Device(spec) for spec in self.cluster.devices]
        self.dev_by_id = {d.spec.device_id: d for d in self.devices}

        def make(owner):
            if duplex:
                return _Channel(self, f"{owner}/h2d", h2d), _Channel(self, f"{owner}/d2h", h2d)
            ch = _Channel(self, f"{owner}/link", h2d)
            return ch, ch

        if shared:
            down, up = make("host")
        for dev in self.devices:
            if not shared:
                down, up = make(dev.spec.device_id)
            dev.down, dev.up = down, up

        d2d = self.cluster.d2d
        fabric = _Channel(self, "fabric/d2d", d2d) if d2d is not None and d2d.shared else None
        for dev in self.devices:
            if d2d is None:
                dev.peer_in = None
            else:
                dev.peer_in = fabric or _Channel(self, f"{dev.spec.device_id}/d2d", d2d)

    def at(self, t: float, fn, *args):
        self._seq += 1
        heapq.heappush(self._heap, (t, self._seq, fn, args))

    def record(self, ev: TraceEvent):
        self.events.append(ev)

    def _when_host_ready(self, tid: int, fn: Callable[[], None]):
        if tid in self.host_ready:
            fn()
        else:
            self.waiters.setdefault(tid, []).append(fn)

    def _mark_host_ready(self, tid: int):
        self.host_ready.add(tid)
        for fn in self.waiters.pop(tid, ()):
            fn()

    # -- dispatch and staging --------------------------------------------
    def candidates(self, dev: _Device) -> list[ShardTask]:
        ids = self.ready | self.prefetchable[dev.spec.device_id]
        return [self.tasks[i] for i in sorted(ids)]

    def dispatch(self, task: ShardTask, dev: _Device):
        tid = task.task_id
        dev_id = dev.spec.device_id
        if tid in self.dispatched:
            raise RuntimeError(f"scheduler returned already-dispatched task {tid}")
        if tid not in self.ready and tid not in self.prefetchable[dev_id]:
            raise RuntimeError(f"scheduler returned task {tid} which is not ready on {dev_id}")
        prefetch = bool(dev.slots)
        if (prefetch and self.options.buffer_bytes is not None
                and task.param_load_bytes > self.options.buffer_bytes):
            raise BufferOverflow(f"task {tid} params ({task.param_load_bytes} B) exceed the "
                                 f"{self.options.buffer_bytes} B prefetch buffer on {dev_id}")
        self.ready.discard(tid)
        self.prefetchable[dev_id].discard(tid)
        self.dispatched.add(tid)
        self.placement[tid] = dev_id

        prev, dev.last_task = dev.last_task, task
        slot = _Slot(task)
        dev.slots.append(slot)
        self.scheduler.on_dispatch(task, dev_id, self.now)

        for child in self.children[tid]:
            c = self.tasks[child]
            if c.pred == tid and self.unmet_after[child] == 0 and child not in self.dispatched:
                self.prefetchable[dev_id].add(child)

        params_resident = (prev is not None and task.direction is Direction.BACKWARD
                           and prev.direction is Direction.FORWARD
                           and (prev.job_id, prev.minibatch_index, prev.microbatch_index, prev.shard_index)
                           == (task.job_id, task.minibatch_index, task.microbatch_index, task.shard_index))
        carried_resident = prev is not None and task.pred is not None and prev.task_id == task.pred

        def done():
            slot.pending -= 1
            if slot.pending == 0:
                slot.staged = True
                self.try_start(dev)

        if task.param_load_bytes and not params_resident:
            slot.pending += 1
            dev.down.submit(task.param_load_bytes, EventKind.PARAM_LOAD, tid, done)

        if task.pred is not None and task.activation_in_bytes and not carried_resident:
            pred = self.tasks[task.pred]
            slot.pending += 1
            nbytes = task.activation_in_bytes
            if pred.spill:
                self._when_host_ready(pred.task_id, lambda: dev.down.submit(
                    nbytes, EventKind.ACT_PROMOTE, tid, done))
            else:
                src = self.dev_by_id[self.placement[pred.task_id]]
                if src is dev:
                    done()
                elif dev.peer_in is not None:
                    dev.peer_in.submit(nbytes, EventKind.PEER_COPY, tid, done)
                else:
                    src.up.submit(nbytes, EventKind.ACT_DEMOTE, tid, lambda: dev.down.submit(
                        nbytes, EventKind.ACT_PROMOTE, tid, done))

        if task.checkpoint_in_bytes and not params_resident:
            src_id = task.checkpoint_src
            slot.pending += 1
            nbytes = task.checkpoint_in_bytes
            if src_id is None:
                dev.down.submit(nbytes, EventKind.ACT_PROMOTE, tid, done)
            else:
                self._when_host_ready(src_id, lambda: dev.down.submit(
                    nbytes, EventKind.ACT_PROMOTE, tid, done))

        done()

    def try_start(self, dev: _Device):
        if dev.running is not None or not dev.slots or not dev.slots[0].staged:
            return
        slot = dev.slots[0]
        dev.running = slot
        dur = slot.task.compute_s * dev.spec.compute_scale
        self.at(self.now + dur, self.finish, dev, slot, self.now)

    def finish(self, dev: _Device, slot: _Slot, started: float):
        task = slot.task
        tid = task.task_id
        self.record(TraceEvent(f"{dev.spec.device_id}/compute", EventKind.COMPUTE, tid, started, self.now))
        dev.running = None
        dev.slots.popleft()
        self.complete.add(tid)

        if task.spill:
            if task.activation_out_bytes:
                dev.up.submit(task.activation_out_bytes, EventKind.ACT_DEMOTE, tid,
                              lambda: self._mark_host_ready(tid))
            else:
                self._mark_host_ready(tid)
            if task.grad_offload_bytes:
                dev.up.submit(task.grad_offload_bytes, EventKind.GRAD_OFFLOAD, tid, lambda: None)

        for child in self.children[tid]:
            c = self.tasks[child]
            if child in self.dispatched:
                continue
            if c.pred != tid:
                self.unmet_after[child] -= 1
            if self.unmet_after[child] != 0:
                continue
            if c.pred is None or c.pred in self.complete:
                for s in self.prefetchable.values():
                    s.discard(child)
                self.ready.add(child)
            elif c.pred in self.dispatched:
                self.prefetchable[self.placement[c.pred]].add(child)

        self.scheduler.on_complete(task, dev.spec.device_id, self.now)
        self.try_start(dev)

    def dispatch_round(self):
        # fill level by level so an idle device gets work before a busy one prefetches
        for level in range(self.capacity):
            for dev in self.devices:
                if len(dev.slots) != level:
                    continue
                cands = self.candidates(dev)
                if not cands:
                    continue
                task = self.scheduler.select(dev.spec.device_id, cands, self.now)
                if task is not None:
                    self.dispatch(task, dev)

    def run(self) -> SimTrace:
        self.dispatch_round()
        while self._heap:
            t = self._heap[0][0]
            self.now = t
            while self._heap and self._heap[0][0] == t:
                _, _, fn, args = heapq.heappop(self._heap)
                fn(*args)
            self.dispatch_round()
        if len(self.complete) != len(self.tasks):
            stuck = sorted(set(self.tasks) - self.complete)
            raise DeadlockError(f"{len(stuck)} tasks never ran (first: {stuck[:5]}); "
                                f"ready={sorted(self.ready)[:5]}")
        return SimTrace(self.events, self.tasks, self.placement,
                        tuple(d.device_id for d in self.cluster.devices),
                        meta={"compute_scale": {d.device_id: d.compute_scale for d in self.cluster.devices}})


def run(cluster: ClusterSpec, scheduler: Scheduler, options: EngineOptions | None = None) -> SimTrace:
    return _Sim(cluster, scheduler, options or EngineOptions()).run()
