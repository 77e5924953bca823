"""Physics-guided 3D tracking of fast-moving balls from gappy detection streams."""

from ._accel import NUMBA_ENABLED, backend_name
from .core import (
    CourtGeometry,
    Detection,
    KinematicState,
    Source,
    TrackedPoint,
    TrackerConfig,
    Trajectory,
    Vec3,
    validate,
)

__version__ = "0.1.0"

__all__ = [
    "NUMBA_ENABLED",
    "CourtGeometry",
    "Detection",
    "KinematicState",
    "Source",
    "TrackedPoint",
    "TrackerConfig",
    "Trajectory",
    "Vec3",
    "backend_name",
    "validate",
    "__version__",
]
