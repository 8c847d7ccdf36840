"""Histogram of Sharded-LRTF / optimal makespan over random tiny instances."""

import argparse
from collections import Counter

from shardsim.gapstudy import gap_study, summarize_gaps


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--instances", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-tasks", type=int, default=10)
    a = p.parse_args()
    rows = gap_study(a.instances, a.seed, a.max_tasks)
    bins = Counter(min(int((r.ratio - 1) / 0.025), 10) for r in rows)
    for b in range(11):
        lo = 1 + 0.025 * b
        label = f"[{lo:.3f}, {lo + 0.025:.3f})" if b < 10 else f">= {lo:.3f}         "
        print(f"{label}  {bins[b]:>4}  {'#' * (60 * bins[b] // len(rows))}")
    for k, v in summarize_gaps(rows).items():
        print(f"{k:<26} {v:.4f}" if isinstance(v, float) else f"{k:<26} {v}")


if __name__ == "__main__":
    main()
