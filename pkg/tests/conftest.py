from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

from cdrcrowd.scenarios import build_demo, write_scenario

# Store-backed properties shuffle real files and arrays; wall-clock
# deadlines only add flakiness there.
settings.register_profile(
    "suite", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def demo_data(tmp_path_factory):
    """The demo scenario written once per session: (scenario, manifest).

    manifest["paths"] has the cells/cdrs/events CSV locations.
    """
    sc = build_demo()
    out = tmp_path_factory.mktemp("demo-data")
    manifest = write_scenario(sc, out)
    return sc, manifest
