"""Makespan-minimisation MILP in CPLEX LP text format.

Formulation over a ``TaskInstance`` (transfers already folded into durations):

* ``s_t``  start time, ``0 <= s_t <= M - d_t``
* ``x_t_g`` task t runs on device g, ``sum_g x_t_g = 1``
* ``y_t_u`` for t < u of different jobs: 1 when t precedes u
* chain precedence ``s_t - s_pred >= d_pred``
* per-device disjunction, active only when both tasks sit on g:
  ``s_u >= s_t + d_t - M(1 - y) - M(2 - x_tg - x_ug)`` and the mirror with ``y``
* ``C >= s_t + d_t``; minimise ``C``

Tasks of the same job never need ``y``: the chain already orders them.
"""

from __future__ import annotations

from .strategies.exact import TaskInstance, TaskSpec, lower_bounds

__all__ = ["MilpInstance", "emit_lp", "lower_bounds"]

MilpInstance = TaskInstance


def _num(v: float) -> str:
    return repr(float(v)) if v != int(v) else str(int(v))


def _lhs(terms: list[tuple[float, str]]) -> str:
    out = []
    for coef, var in terms:
        sign = "-" if coef < 0 else "+"
        mag = abs(coef)
        body = var if mag == 1 else f"{_num(mag)} {var}"
        out.append(f"{sign} {body}")
    text = " ".join(out)
    return text[2:] if text.startswith("+ ") else text


def emit_lp(instance: MilpInstance) -> str:
    tasks = sorted(instance.tasks, key=lambda t: t.task_id)
    by_id: dict[int, TaskSpec] = {t.task_id: t for t in tasks}
    devices = range(instance.devices)
    big = instance.big_m
    s = {t.task_id: f"s_{t.task_id}" for t in tasks}
    x = {(t.task_id, g): f"x_{t.task_id}_{g}" for t in tasks for g in devices}
    pairs = [(a, b) for i, a in enumerate(tasks) for b in tasks[i + 1:] if a.job_id != b.job_id]
    y = {(a.task_id, b.task_id): f"y_{a.task_id}_{b.task_id}" for a, b in pairs}

    rows: list[str] = []

    def row(name: str, terms, sense: str, rhs: float):
        rows.append(f" {name}: {_lhs(terms)} {sense} {_num(rhs)}")

    for t in tasks:
        row(f"assign_{t.task_id}", [(1, x[t.task_id, g]) for g in devices], "=", 1)
    for t in tasks:
        if t.pred is not None:
            row(f"chain_{t.task_id}", [(1, s[t.task_id]), (-1, s[t.pred])], ">=", by_id[t.pred].duration_s)
    for t in tasks:
        row(f"span_{t.task_id}", [(1, "C"), (-1, s[t.task_id])], ">=", t.duration_s)
    for a, b in pairs:
        ta, tb = a.task_id, b.task_id
        yv = y[ta, tb]
        for g in devices:
            # y = 1: a before b
            row(f"order_{ta}_{tb}_{g}_a",
                [(1, s[tb]), (-1, s[ta]), (-big, yv), (-big, x[ta, g]), (-big, x[tb, g])],
                ">=", a.duration_s - 3 * big)
            # y = 0: b before a
            row(f"order_{ta}_{tb}_{g}_b",
                [(1, s[ta]), (-1, s[tb]), (big, yv), (-big, x[ta, g]), (-big, x[tb, g])],
                ">=", b.duration_s - 2 * big)

    lines = ["\\ makespan minimisation, non-preemptive chain tasks", "Minimize", " obj: C", "Subject To"]
    lines += rows
    lines.append("Bounds")
    for t in tasks:
        lines.append(f" 0 <= {s[t.task_id]} <= {_num(big - t.duration_s)}")
    lines.append(f" 0 <= C <= {_num(big)}")
    lines.append("Binaries")
    lines += [f" {v}" for v in x.values()]
    lines += [f" {v}" for v in y.values()]
    lines.append("End")
    return "\n".join(lines) + "\n"
