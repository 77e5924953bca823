import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from phystrack.core import CourtGeometry, Source, TrackedPoint, Trajectory, Vec3  # noqa: E402

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# Large gravity-free box: lets tests place states anywhere without walls interfering.
OPEN_SPACE = CourtGeometry(Vec3(-1e3, -1e3, -1e3), Vec3(1e3, 1e3, 1e3), gravity=Vec3(0.0, 0.0, 0.0))


def trajectory_from(positions, t0=0.0, dt=1.0 / 60.0, source=Source.MEASURED) -> Trajectory:
    points = tuple(
        TrackedPoint(i, t0 + i * dt, Vec3.of(p), Vec3(0.0, 0.0, 0.0), source) for i, p in enumerate(np.asarray(positions, float))
    )
    return Trajectory(points)


@pytest.fixture
def open_space():
    return OPEN_SPACE


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
