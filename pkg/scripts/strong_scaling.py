"""Identical spilled jobs under Sharded-LRTF as the device count grows.

Prints makespan(G) * G / makespan(1); 1.0 is perfect scaling.
"""

import argparse

from shardsim.model import GB, ClusterSpec, DeviceSpec, InterconnectSpec, LayerProfile, ModelJob, \
    make_uniform_model
from shardsim.strategies import StrategyConfig, run_strategy


def cluster(g, bw, shared):
    devs = tuple(DeviceSpec(f"gpu{i}", 16 * GB) for i in range(g))
    return ClusterSpec(devs, 10**13, InterconnectSpec("host-to-device", bw, 1e-5, shared=shared))


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--jobs", type=int, default=8)
    p.add_argument("--devices", default="1,2,4,8")
    p.add_argument("--bandwidth", type=float, default=12e9)
    p.add_argument("--shared-link", action="store_true", help="one host link for all devices")
    a = p.parse_args()

    model = make_uniform_model(24, LayerProfile(10**9, 10**7, 0.2), input_batch_bytes=10**8)
    jobs = [ModelJob(f"j{i}", model, minibatches_per_epoch=2) for i in range(a.jobs)]
    base = None
    print(f"{'G':>3} {'makespan_s':>12} {'ratio':>8}")
    for g in (int(x) for x in a.devices.split(",")):
        span = run_strategy(StrategyConfig("sharp"), jobs, cluster(g, a.bandwidth, a.shared_link)).makespan
        base = base or span * g
        print(f"{g:>3} {span:>12.3f} {span * g / base:>8.4f}")


if __name__ == "__main__":
    main()
