"""Every strategy on the 12-job GPT-2 grid search over four V100s."""

import argparse
from pathlib import Path

from shardsim.cli import simulate
from shardsim.config import load_config
from shardsim.metrics import compare, comparison_csv, comparison_text

DEFAULT = Path(__file__).resolve().parent.parent / "configs" / "gpt2_gridsearch.json"


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--config", default=str(DEFAULT))
    p.add_argument("--baseline", default="sharp")
    p.add_argument("--csv", action="store_true")
    a = p.parse_args()
    cfg = load_config(a.config)
    reports = [simulate(cfg, s)[0] for s in cfg.build_strategies()]
    rows = compare(reports, a.baseline)
    print(comparison_csv(rows) if a.csv else comparison_text(rows, a.baseline), end="")


if __name__ == "__main__":
    main()
