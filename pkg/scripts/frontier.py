"""Largest trainable transformer per strategy on a V100 and a K80 cluster."""

from shardsim.metrics import feasibility_frontier, frontier_text, transformer_family
from shardsim.presets import k80_cluster, v100_cluster
from shardsim.strategies import StrategyConfig

SIZES = [0.5e9, 1e9, 1.5e9, 2e9, 3e9, 4e9, 6e9, 8e9, 12e9, 16e9, 24e9, 32e9]
STRATEGIES = [StrategyConfig("sharp"), StrategyConfig("model-parallel"),
              StrategyConfig("pipeline-parallel", microbatches=4),
              StrategyConfig("hybrid", gpus_per_model=2), StrategyConfig("task-parallel")]


def main():
    family = transformer_family(SIZES)
    for name, cluster in (("v100 x4", v100_cluster(4)), ("k80 x8", k80_cluster(8))):
        print(f"# {name}")
        print(frontier_text(feasibility_frontier(family, cluster, STRATEGIES)))


if __name__ == "__main__":
    main()
