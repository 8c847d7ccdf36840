"""Run reports, strategy comparisons and feasibility frontiers.

Energy is a linear proxy: each device draws ``busy_power_w`` while computing
and ``idle_power_w`` otherwise, for the whole makespan. Nothing is measured.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

from .errors import ConfigError, InfeasibleError
from .model import ClusterSpec, LayerProfile, ModelProfile, make_uniform_model, scaled_transformer
from .partition import BufferPolicy
from .strategies import StrategyConfig, check_feasible
from .trace import SimTrace


@dataclass(frozen=True)
class DeviceUsage:
    device_id: str
    busy_s: float
    idle_s: float
    utilization: float


@dataclass
class RunReport:
    strategy: str
    makespan_s: float | None
    devices: list[DeviceUsage] = field(default_factory=list)
    channel_busy_s: dict[str, float] = field(default_factory=dict)
    energy_j: float | None = None
    cost: float | None = None
    feasibility: str = "OK"
    job_completion_s: dict[str, float] = field(default_factory=dict)
    deficit_bytes: int = 0

    @property
    def ok(self) -> bool:
        return self.feasibility == "OK"

    @property
    def mean_utilization(self) -> float:
        return math.fsum(d.utilization for d in self.devices) / len(self.devices) if self.devices else 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mean_utilization"] = self.mean_utilization
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        """Long format: one ``scope,name,metric,value`` row per number."""
        rows = [("run", self.strategy, "makespan_s", self.makespan_s),
                ("run", self.strategy, "energy_j", self.energy_j),
                ("run", self.strategy, "cost", self.cost),
                ("run", self.strategy, "mean_utilization", self.mean_utilization),
                ("run", self.strategy, "feasibility", self.feasibility)]
        for d in self.devices:
            rows += [("device", d.device_id, "busy_s", d.busy_s),
                     ("device", d.device_id, "idle_s", d.idle_s),
                     ("device", d.device_id, "utilization", d.utilization)]
        rows += [("channel", ch, "busy_s", v) for ch, v in sorted(self.channel_busy_s.items())]
        rows += [("job", j, "completion_s", v) for j, v in sorted(self.job_completion_s.items())]
        return _csv(["scope", "name", "metric", "value"], rows)

    def to_text(self) -> str:
        if not self.ok:
            return f"{self.strategy}: {self.feasibility}\n"
        lines = [f"strategy     {self.strategy}",
                 f"makespan_s   {self.makespan_s:.6f}",
                 f"energy_j     {self.energy_j:.3f}",
                 f"cost         {self.cost:.6f}",
                 f"utilization  {self.mean_utilization:.4f}",
                 f"jobs         {len(self.job_completion_s)}"]
        width = max(len(d.device_id) for d in self.devices)
        for d in self.devices:
            lines.append(f"  {d.device_id:<{width}}  busy {d.busy_s:12.6f}  idle {d.idle_s:12.6f}  "
                         f"util {d.utilization:.4f}")
        return "\n".join(lines) + "\n"


def _csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(["" if v is None else v for v in r] for r in rows)
    return buf.getvalue()


def summarize(trace: SimTrace, cluster: ClusterSpec, strategy: str = "") -> RunReport:
    span = trace.makespan
    devices, energy = [], 0.0
    for spec in cluster.devices:
        busy = trace.busy_s(spec.device_id)
        idle = max(0.0, span - busy)
        util = busy / span if span > 0 else 0.0
        devices.append(DeviceUsage(spec.device_id, busy, idle, min(1.0, util)))
        energy += busy * spec.busy_power_w + idle * spec.idle_power_w
    channels = {res: math.fsum(e.duration_s for e in evs)
                for res, evs in sorted(trace.by_resource().items()) if not res.endswith("/compute")}
    cost = span / 3600.0 * math.fsum(d.hourly_price for d in cluster.devices)
    return RunReport(strategy, span, devices, channels, energy, cost, "OK", trace.job_completion_s())


def infeasible_report(strategy: str, exc: InfeasibleError) -> RunReport:
    return RunReport(strategy, None, feasibility=f"InfeasibleOOM({exc})",
                     deficit_bytes=getattr(exc, "deficit_bytes", 0))


# -- comparison ---------------------------------------------------------------

@dataclass(frozen=True)
class ComparisonRow:
    strategy: str
    makespan_s: float | None
    speedup: float | None
    cost_ratio: float | None
    energy_ratio: float | None
    feasibility: str


def _ratio(num, den):
    if num is None or den is None or den == 0:
        return None
    return num / den


def compare(reports: Sequence[RunReport], baseline: str) -> list[ComparisonRow]:
    """Ratios against ``baseline``: speedup = baseline makespan / makespan; cost and energy relative."""
    if len(reports) < 2:
        raise ConfigError("compare needs at least two reports")
    base = next((r for r in reports if r.strategy == baseline), None)
    if base is None:
        raise ConfigError(f"baseline {baseline!r} not among {[r.strategy for r in reports]}")
    return [ComparisonRow(r.strategy, r.makespan_s, _ratio(base.makespan_s, r.makespan_s),
                          _ratio(r.cost, base.cost), _ratio(r.energy_j, base.energy_j), r.feasibility)
            for r in reports]


_COLUMNS = ("strategy", "makespan_s", "speedup", "cost_ratio", "energy_ratio", "feasibility")


def comparison_csv(rows: Sequence[ComparisonRow]) -> str:
    return _csv(_COLUMNS, [tuple(getattr(r, c) for c in _COLUMNS) for r in rows])


def comparison_text(rows: Sequence[ComparisonRow], baseline: str = "") -> str:
    def fmt(v):
        if v is None:
            return "-"
        return f"{v:.4f}" if isinstance(v, float) else str(v)

    table = [list(_COLUMNS)] + [[fmt(getattr(r, c)) for c in _COLUMNS] for r in rows]
    widths = [max(len(row[i]) for row in table) for i in range(len(_COLUMNS))]
    lines = ["  ".join(cell.ljust(w) if i in (0, 5) else cell.rjust(w) for i, (cell, w) in
                       enumerate(zip(row, widths))).rstrip() for row in table]
    if baseline:
        lines.append(f"(ratios relative to {baseline})")
    return "\n".join(lines) + "\n"


# -- feasibility frontier -----------------------------------------------------

@dataclass(frozen=True)
class FrontierRow:
    strategy: str
    max_feasible_size: float | None
    model: str | None
    first_failure: str = ""


def feasibility_frontier(models: Sequence[tuple[float, ModelProfile]], cluster: ClusterSpec,
                         strategies: Sequence[StrategyConfig],
                         buffer_policy: BufferPolicy | None = None) -> list[FrontierRow]:
    """Largest size each strategy can hold, from capacity arithmetic alone.

    ``models`` is ``(size, profile)`` pairs with sizes ascending.
    """
    sizes = [s for s, _ in models]
    if sizes != sorted(sizes):
        raise ValueError("model sizes must be ascending")
    rows = []
    for cfg in strategies:
        best, name, failure = None, None, ""
        for size, model in models:
            f = check_feasible(cfg, model, cluster, buffer_policy)
            if f.ok:
                best, name = size, model.name
            elif not failure:
                failure = f.detail
        rows.append(FrontierRow(cfg.label, best, name, failure))
    return rows


def frontier_csv(rows: Sequence[FrontierRow]) -> str:
    return _csv(["strategy", "max_feasible_size", "model", "first_failure"],
                [(r.strategy, r.max_feasible_size, r.model, r.first_failure) for r in rows])


def frontier_text(rows: Sequence[FrontierRow]) -> str:
    width = max(len(r.strategy) for r in rows)
    out = []
    for r in rows:
        size = "none" if r.max_feasible_size is None else f"{r.max_feasible_size:.6g}"
        out.append(f"{r.strategy:<{width}}  {size:>12}  {r.model or '-'}")
    return "\n".join(out) + "\n"


def uniform_family(layer_counts: Sequence[int], per_layer: LayerProfile,
                   input_batch_bytes: int = 0) -> list[tuple[float, ModelProfile]]:
    """Models of identical layers; size is the layer count."""
    return [(n, make_uniform_model(n, per_layer, input_batch_bytes, name=f"uniform-{n}"))
            for n in sorted(layer_counts)]


def transformer_family(param_counts: Sequence[float], **kwargs) -> list[tuple[float, ModelProfile]]:
    """Fixed-depth transformers widened to each parameter count; size is the nominal count."""
    return [(p, scaled_transformer(p, **kwargs)) for p in sorted(param_counts)]
