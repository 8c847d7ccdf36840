import math

import pytest
from hypothesis import HealthCheck, settings

from shardsim.model import ClusterSpec, DeviceSpec, InterconnectSpec

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def make_cluster(n=1, mem=10**12, bw=math.inf, latency=0.0, duplex=True, shared=False, d2d=None,
                 host=10**15, **dev_kwargs):
    devs = tuple(DeviceSpec(f"gpu{i}", mem, **dev_kwargs) for i in range(n))
    link = InterconnectSpec("host-to-device", bw, latency, duplex=duplex, shared=shared)
    return ClusterSpec(devs, host, link, d2d)


@pytest.fixture
def cluster_factory():
    return make_cluster


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
