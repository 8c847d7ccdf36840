import json
from pathlib import Path

import pytest

from shardsim.config import SCHEMA_VERSION, load_config, loads_config, parse_config
from shardsim.errors import ConfigError
from shardsim.presets import GB

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@pytest.mark.parametrize("name", ["tiny.json", "gpt2_gridsearch.json"])
def test_round_trip(name):
    cfg = load_config(CONFIGS / name)
    again = loads_config(cfg.to_json())
    assert again == cfg
    assert again.to_json() == cfg.to_json()


def _tiny():
    return json.loads((CONFIGS / "tiny.json").read_text())


def test_unknown_field_rejected():
    data = _tiny()
    data["cluster"]["h2d"]["bandwith_Bps"] = 1.0
    with pytest.raises(ConfigError, match="bandwith_Bps"):
        parse_config(data)


def test_missing_field_rejected():
    data = _tiny()
    del data["models"]["small"]["layer"]["fwd_compute_s"]
    with pytest.raises(ConfigError, match="fwd_compute_s"):
        parse_config(data)


def test_schema_version_checked():
    data = _tiny()
    data["schema_version"] = SCHEMA_VERSION + 1
    with pytest.raises(ConfigError, match="schema_version"):
        parse_config(data)
    del data["schema_version"]
    with pytest.raises(ConfigError):
        parse_config(data)


def test_wrong_type_rejected():
    data = _tiny()
    data["cluster"]["devices"][0]["mem_bytes"] = "lots"
    with pytest.raises(ConfigError):
        parse_config(data)


def test_invalid_json():
    with pytest.raises(ConfigError, match="invalid JSON"):
        loads_config("{")


def test_unknown_model_reference():
    data = _tiny()
    data["jobs"][0]["model"] = "nope"
    with pytest.raises(ConfigError, match="nope"):
        parse_config(data).build_jobs()


def test_duplicate_job_ids():
    data = _tiny()
    data["jobs"][1]["job_id"] = "a"
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config(data).build_jobs()


def test_bad_values_become_config_errors():
    data = _tiny()
    data["cluster"]["devices"][0]["mem_bytes"] = 0
    with pytest.raises(ConfigError):
        parse_config(data).build_cluster()
    data = _tiny()
    data["strategies"] = [{"kind": "pipeline-parallel", "microbatches": 0}]
    with pytest.raises(ConfigError):
        parse_config(data).build_strategies()


def test_gridsearch_preset():
    cfg = load_config(CONFIGS / "gpt2_gridsearch.json")
    jobs = cfg.build_jobs()
    assert len(jobs) == 12
    assert {j.hyperparams["batch_size"] for j in jobs} == {16, 8}
    assert {j.hyperparams["lr"] for j in jobs} == {0.0003, 0.0001, 0.00005, 0.00006, 0.00001, 0.00002}
    assert len({(j.hyperparams["batch_size"], j.hyperparams["lr"]) for j in jobs}) == 12
    cluster = cfg.build_cluster()
    assert cluster.n_devices == 4 and all(d.mem_bytes == 16 * GB for d in cluster.devices)
    assert cluster.host_dram_bytes == 512 * GB
