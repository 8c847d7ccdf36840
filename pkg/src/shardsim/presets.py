"""Named clusters and workloads.

Hardware numbers are round public figures (memory, list price, nominal
power), not measurements. Throughputs are effective rates chosen once and kept
fixed; only relative comparisons between strategies are meaningful.
"""

from __future__ import annotations

from .model import GB, ClusterSpec, DeviceSpec, InterconnectSpec, ModelJob, make_transformer_model

GRID_BATCH_SIZES = (16, 8)
GRID_LEARNING_RATES = (0.0003, 0.0001, 0.00005, 0.00006, 0.00001, 0.00002)
CONTEXT_LENGTH = 512

# GPT-2 XL shape
GPT2_BLOCKS = 48
GPT2_WIDTH = 1600
V100_EFFECTIVE_FLOPS = 30e12


def v100_cluster(n: int = 4, host_dram_bytes: int = 512 * GB) -> ClusterSpec:
    devs = tuple(DeviceSpec(f"gpu{i}", mem_bytes=16 * GB, compute_scale=1.0, busy_power_w=300.0,
                            idle_power_w=50.0, hourly_price=3.06) for i in range(n))
    return ClusterSpec(
        devs, host_dram_bytes=host_dram_bytes,
        h2d=InterconnectSpec("host-to-device", bandwidth_Bps=12e9, latency_s=10e-6),
        d2d=InterconnectSpec("device-to-device", bandwidth_Bps=150e9, latency_s=5e-6),
    )


def k80_cluster(n: int = 8, host_dram_bytes: int = 488 * GB) -> ClusterSpec:
    devs = tuple(DeviceSpec(f"gpu{i}", mem_bytes=12 * GB, compute_scale=3.5, busy_power_w=150.0,
                            idle_power_w=30.0, hourly_price=0.9) for i in range(n))
    return ClusterSpec(
        devs, host_dram_bytes=host_dram_bytes,
        h2d=InterconnectSpec("host-to-device", bandwidth_Bps=6e9, latency_s=10e-6),
        d2d=InterconnectSpec("device-to-device", bandwidth_Bps=6e9, latency_s=10e-6, shared=True),
    )


CLUSTERS = {"v100x4": v100_cluster, "k80x8": k80_cluster}


def gpt2_model(batch_size: int, bytes_per_param: int = 4):
    return make_transformer_model(GPT2_BLOCKS, GPT2_WIDTH, CONTEXT_LENGTH, batch_size, bytes_per_param,
                                  V100_EFFECTIVE_FLOPS, name=f"gpt2-xl-bs{batch_size}")


def gpt2_gridsearch(epochs: int = 1, minibatches_per_epoch: int = 4) -> list[ModelJob]:
    """The 12-configuration grid: 2 batch sizes x 6 learning rates."""
    models = {bs: gpt2_model(bs) for bs in GRID_BATCH_SIZES}
    jobs = []
    for bs in GRID_BATCH_SIZES:
        for lr in GRID_LEARNING_RATES:
            jobs.append(ModelJob(
                job_id=f"j{len(jobs):02d}",
                model=models[bs],
                epochs=epochs,
                minibatches_per_epoch=minibatches_per_epoch,
                batch_size=bs,
                hyperparams={"lr": lr, "batch_size": bs},
            ))
    return jobs


WORKLOADS = {"gpt2-gridsearch": gpt2_gridsearch}
