"""Reference implementations kept deliberately naive and separate from the package."""

import itertools


def prefix_cuts(footprints, capacity):
    """Shard starts by prefix sums: a cut lands where the running total since the last cut overflows."""
    if any(f > capacity for f in footprints):
        return None
    starts, base = [0], 0
    sums = list(itertools.accumulate(footprints, initial=0))
    for i in range(len(footprints)):
        if sums[i + 1] - sums[base] > capacity:
            starts.append(i)
            base = i
    return starts


def spilled_forward_makespan(loads, computes, slots=2):
    """One device, forward-only chain, ``slots`` staged tasks, one FIFO host link.

    Task j is staged once task j-slots has finished computing; its load queues
    behind load j-1; compute waits for the load and for compute j-1.
    """
    load_end, comp_end = [], []
    for j, (ld, c) in enumerate(zip(loads, computes)):
        dispatch = comp_end[j - slots] if j >= slots else 0.0
        start = max(dispatch, load_end[-1] if load_end else 0.0)
        load_end.append(start + ld)
        comp_end.append(max(load_end[-1], comp_end[-1] if comp_end else 0.0) + c)
    return comp_end[-1]


def transformer_param_count(n_blocks, d, vocab, seq):
    """Standard GPT-2 count: embeddings, per-block attention/MLP/norms, final norm."""
    per_block = (4 * d * d + 4 * d) + (8 * d * d + 5 * d) + 4 * d
    return (vocab + seq) * d + n_blocks * per_block + 2 * d


def fill_drain_forward_span(k, m, stage_time):
    return (m + k - 1) * stage_time / m
