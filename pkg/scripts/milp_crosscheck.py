"""Solve exported MILPs with HiGHS and compare against the exact search.

Needs the optional ``highspy`` package (pip install -e .[solver]).
"""

import argparse
import random
import tempfile
from pathlib import Path

import highspy

from shardsim.gapstudy import random_instance
from shardsim.milp import emit_lp, lower_bounds
from shardsim.strategies import exact_optimal


def solve(text: str) -> float:
    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "model.lp"
        path.write_text(text)
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.readModel(str(path))
        h.run()
        return h.getInfo().objective_function_value


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--instances", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-tasks", type=int, default=7)
    a = p.parse_args()
    rng = random.Random(a.seed)
    mismatches = 0
    print(f"{'idx':>4} {'tasks':>5} {'devs':>4} {'bound':>8} {'exact':>8} {'highs':>8}")
    for i in range(a.instances):
        inst = random_instance(rng, max_tasks=a.max_tasks)
        exact, highs = exact_optimal(inst)[0], solve(emit_lp(inst))
        mismatches += abs(exact - highs) > 1e-6
        print(f"{i:>4} {len(inst.tasks):>5} {inst.devices:>4} {max(lower_bounds(inst)):>8.2f} "
              f"{exact:>8.2f} {highs:>8.2f}")
    print(f"mismatches: {mismatches}/{a.instances}")


if __name__ == "__main__":
    main()
