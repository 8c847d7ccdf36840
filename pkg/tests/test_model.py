import math

import pytest
from hypothesis import given, strategies as st

from shardsim.model import (GB, MAX_BYTES, ClusterSpec, DeviceSpec, InterconnectSpec, LayerProfile,
                            ModelJob, ModelProfile, make_transformer_model, make_uniform_model,
                            scaled_transformer, transformer_block_flops)

from oracles import transformer_param_count

sizes = st.integers(0, 10**12)


def test_uniform_single_layer():
    m = make_uniform_model(1, LayerProfile(4 * GB, 0, 1.0))
    assert m.total_param_bytes == 4 * GB


def test_uniform_additive():
    m = make_uniform_model(4, LayerProfile(1 * GB, 0, 1.0))
    assert m.total_param_bytes == 4 * GB and m.n_layers == 4


def test_uniform_rejects_empty():
    with pytest.raises(ValueError):
        make_uniform_model(0, LayerProfile(1, 0, 1.0))


def test_bwd_defaults_to_twice_fwd():
    assert LayerProfile(1, 1, 0.25).bwd_compute_s == 0.5
    assert LayerProfile(1, 1, 0.25, bwd_compute_s=0.3).bwd_compute_s == 0.3


def test_pilot_footprint_formula():
    assert LayerProfile(10, 3, 1.0, workspace_bytes=7).pilot_footprint == 2 * 10 + 2 * 3 + 7


@pytest.mark.parametrize("kwargs", [
    dict(param_bytes=-1, activation_out_bytes=0, fwd_compute_s=1.0),
    dict(param_bytes=1, activation_out_bytes=0, fwd_compute_s=0.0),
    dict(param_bytes=0, activation_out_bytes=0, fwd_compute_s=1.0),
    dict(param_bytes=1, activation_out_bytes=0, fwd_compute_s=math.inf),
])
def test_layer_validation(kwargs):
    with pytest.raises(ValueError):
        LayerProfile(**kwargs)


def test_byte_overflow_rejected():
    with pytest.raises(OverflowError):
        LayerProfile(MAX_BYTES + 1, 0, 1.0)
    big = LayerProfile(MAX_BYTES // 4, 0, 1.0)
    with pytest.raises(OverflowError):
        ModelProfile("huge", (big,) * 8)


@given(sizes, sizes, sizes, st.sampled_from(["param_bytes", "activation_out_bytes", "workspace_bytes"]),
       st.integers(1, 10**9))
def test_pilot_footprint_monotone(p, a, w, fieldname, bump):
    base = dict(param_bytes=p + 1, activation_out_bytes=a, workspace_bytes=w, fwd_compute_s=1.0)
    bigger = dict(base, **{fieldname: base[fieldname] + bump})
    assert LayerProfile(**bigger).pilot_footprint > LayerProfile(**base).pilot_footprint


def test_gpt2_xl_param_count_against_reference():
    m = make_transformer_model(48, 1600, 512, 1, 4, 1e12)
    ref = transformer_param_count(48, 1600, 50257, 512)
    assert abs(m.total_param_bytes / 4 - ref) / ref < 0.01
    assert abs(m.total_param_bytes / 4 - 1.5e9) / 1.5e9 < 0.10


def test_transformer_block_shapes():
    d, s, b, bpp, flops = 64, 32, 3, 2, 1e9
    m = make_transformer_model(2, d, s, b, bpp, flops)
    block = m.layers[1]
    assert block.param_bytes == 12 * d * d * bpp
    assert block.activation_out_bytes == b * s * d * bpp
    assert block.fwd_compute_s == (24 * b * s * d * d + 4 * b * s * s * d) / flops
    assert block.bwd_compute_s == 2 * block.fwd_compute_s
    assert m.n_layers == 4  # embed + 2 blocks + head


def test_transformer_all_ones():
    m = make_transformer_model(1, 1, 1, 1, 1, 1.0, vocab_size=1)
    assert all(l.fwd_compute_s > 0 and l.bwd_compute_s > 0 for l in m.layers)
    assert sum(1 for l in m.layers if l.name == "block") == 1


def test_batch_doubling_doubles_block_time():
    a = make_transformer_model(4, 256, 128, 2, 4, 1e12).layers[1]
    b = make_transformer_model(4, 256, 128, 4, 4, 1e12).layers[1]
    assert b.fwd_compute_s == 2 * a.fwd_compute_s
    assert transformer_block_flops(256, 128, 4) == 2 * transformer_block_flops(256, 128, 2)


def test_transformer_rejects_bad_dims():
    with pytest.raises(ValueError):
        make_transformer_model(0, 64, 8, 1, 4, 1e12)
    with pytest.raises(ValueError):
        make_transformer_model(1, 64, 8, 1, 4, 0.0)


def test_generators_deterministic():
    assert make_transformer_model(12, 768, 512, 8, 4, 3e13) == make_transformer_model(12, 768, 512, 8, 4, 3e13)
    assert scaled_transformer(6e9) == scaled_transformer(6e9)


@pytest.mark.parametrize("target", [1e9, 6e9, 20e9])
def test_scaled_transformer_hits_target(target):
    m = scaled_transformer(target)
    # width rounds to a multiple of 64, so allow a few percent
    assert abs(m.total_param_bytes / 4 - target) / target < 0.05


@given(st.integers(1, 6), st.integers(8, 512), st.integers(1, 64), st.integers(1, 8))
def test_model_totals_positive(n, d, seq, batch):
    m = make_transformer_model(n, d, seq, batch, 2, 1e13)
    assert 0 < m.total_fwd_s < math.inf and 0 < m.total_bwd_s < math.inf


def test_device_and_link_validation():
    with pytest.raises(ValueError):
        DeviceSpec("g", 0)
    with pytest.raises(ValueError):
        DeviceSpec("g", 1, compute_scale=0)
    with pytest.raises(ValueError):
        DeviceSpec("g", 1, busy_power_w=10, idle_power_w=20)
    with pytest.raises(ValueError):
        InterconnectSpec("host-to-device", 0)
    with pytest.raises(ValueError):
        InterconnectSpec("sideways", 1)
    with pytest.raises(ValueError):
        InterconnectSpec("host-to-device", 1, latency_s=-1)


def test_cluster_validation():
    link = InterconnectSpec("host-to-device", 1e9)
    with pytest.raises(ValueError):
        ClusterSpec((), 1, link)
    with pytest.raises(ValueError):
        ClusterSpec((DeviceSpec("a", 1), DeviceSpec("a", 1)), 1, link)
    with pytest.raises(ValueError):
        ClusterSpec((DeviceSpec("a", 1),), 0, link)
    c = ClusterSpec((DeviceSpec("a", 1), DeviceSpec("b", 1)), 1, link)
    assert c.with_devices(1).n_devices == 1 and c.device("b").device_id == "b"


def test_job_validation():
    m = make_uniform_model(1, LayerProfile(1, 0, 1.0))
    with pytest.raises(ValueError):
        ModelJob("j", m, epochs=0)
    assert ModelJob("j", m, epochs=3, minibatches_per_epoch=5).n_minibatches == 15


def test_host_state_counts_optimizer_and_checkpoints():
    m = make_uniform_model(3, LayerProfile(10, 2, 1.0))
    assert m.host_state_bytes() == 4 * 30 + 6
