import csv
import io
import json

import pytest

from shardsim.engine import Direction, ShardTask
from shardsim.errors import ConfigError, InfeasibleOOM
from shardsim.metrics import (RunReport, compare, comparison_csv, comparison_text, feasibility_frontier,
                              frontier_csv, infeasible_report, summarize, transformer_family, uniform_family)
from shardsim.model import LayerProfile
from shardsim.presets import v100_cluster
from shardsim.strategies import StrategyConfig
from shardsim.trace import EventKind, SimTrace, TraceEvent

from conftest import make_cluster

GB = 1 << 30


def one_task_trace(compute_s, span_s, devices=("gpu0", "gpu1")):
    task = ShardTask(0, "a", 0, 0, Direction.FORWARD, compute_s)
    events = [TraceEvent("gpu0/compute", EventKind.COMPUTE, 0, 0.0, compute_s)]
    if span_s > compute_s:
        events.append(TraceEvent("gpu1/h2d", EventKind.PARAM_LOAD, None, 0.0, span_s))
    return SimTrace(events, {0: task}, {0: "gpu0"}, devices)


def test_full_utilization():
    report = summarize(one_task_trace(5.0, 5.0, ("gpu0",)), make_cluster(n=1))
    assert report.devices[0].utilization == 1.0 and report.devices[0].idle_s == 0.0


def test_energy_proxy():
    # gpu0: 10 s busy at 300 W; gpu1: 10 s idle at 50 W
    report = summarize(one_task_trace(10.0, 10.0), make_cluster(n=2))
    assert report.energy_j == pytest.approx(3500.0)
    assert report.mean_utilization == pytest.approx(0.5)


def test_cost_uses_hourly_price():
    report = summarize(one_task_trace(3600.0, 3600.0), make_cluster(n=2, hourly_price=2.0))
    assert report.cost == pytest.approx(4.0)


def test_channel_busy_time():
    report = summarize(one_task_trace(2.0, 7.0), make_cluster(n=2))
    assert report.channel_busy_s == {"gpu1/h2d": 7.0}
    assert report.makespan_s == 7.0


def _report(name, span, cost=1.0, energy=1.0):
    return RunReport(name, span, cost=cost, energy_j=energy)


def test_compare_speedup():
    rows = compare([_report("sharp", 100.0), _report("tp", 250.0, 2.0, 4.0)], "tp")
    by = {r.strategy: r for r in rows}
    assert by["sharp"].speedup == pytest.approx(2.5)
    assert by["tp"].speedup == 1.0
    assert by["sharp"].cost_ratio == pytest.approx(0.5) and by["sharp"].energy_ratio == pytest.approx(0.25)


def test_compare_errors():
    with pytest.raises(ConfigError):
        compare([_report("a", 1.0)], "a")
    with pytest.raises(ConfigError):
        compare([_report("a", 1.0), _report("b", 2.0)], "c")


def test_compare_infeasible_has_no_ratios():
    bad = infeasible_report("tp", InfeasibleOOM("a", "gpu0", 5))
    assert not bad.ok and bad.feasibility.startswith("InfeasibleOOM(") and bad.deficit_bytes == 5
    rows = compare([_report("sharp", 10.0), bad], "sharp")
    assert rows[1].speedup is None
    text = comparison_text(rows, "sharp")
    assert "InfeasibleOOM" in text and "(ratios relative to sharp)" in text
    parsed = list(csv.DictReader(io.StringIO(comparison_csv(rows))))
    assert parsed[0]["speedup"] == "1.0" and parsed[1]["makespan_s"] == ""


def test_report_serializations():
    report = summarize(one_task_trace(10.0, 10.0), make_cluster(n=2))
    data = json.loads(report.to_json())
    assert data["makespan_s"] == 10.0 and data["mean_utilization"] == 0.5
    rows = list(csv.reader(io.StringIO(report.to_csv())))
    assert rows[0] == ["scope", "name", "metric", "value"]
    assert ["device", "gpu1", "utilization", "0.0"] in rows
    assert "makespan_s" in report.to_text()


STRATS = [StrategyConfig("sharp"), StrategyConfig("model-parallel", gpus_per_model=4),
          StrategyConfig("task-parallel")]


def test_uniform_frontier_order():
    # 200 B per layer, 1000 B devices
    family = uniform_family(range(1, 41), LayerProfile(100, 0, 1.0))
    rows = {r.strategy: r.max_feasible_size for r in
            feasibility_frontier(family, make_cluster(n=4, mem=1000, host=10**6), STRATS)}
    assert rows["sharp"] > rows["model-parallel"] > rows["task-parallel"]
    # four devices hold four times what one does
    assert rows["model-parallel"] == 4 * rows["task-parallel"]


def test_transformer_frontier_on_v100():
    family = transformer_family([1e9, 2e9, 4e9, 6e9, 8e9])
    rows = {r.strategy: r for r in feasibility_frontier(family, v100_cluster(4), STRATS)}
    assert rows["sharp"].max_feasible_size == 8e9
    assert rows["task-parallel"].max_feasible_size < 6e9
    assert "short by" in rows["task-parallel"].first_failure
    assert "strategy,max_feasible_size" in frontier_csv(list(rows.values()))


def test_frontier_requires_ascending_sizes():
    family = uniform_family([1, 2], LayerProfile(1, 0, 1.0))
    with pytest.raises(ValueError):
        feasibility_frontier(family[::-1], make_cluster(), STRATS)
