"""Average displacement error and average Mahalanobis distance.

AMD is the mean point-to-distribution Mahalanobis distance of the predicted
points against a Gaussian (sample mean, unbiased sample covariance) fitted
to the ground-truth point cloud.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .collision import CollisionEvent
from .core import InvalidInputError, Source, Trajectory, TrackingError


class AlignmentError(TrackingError, ValueError):
    pass


@dataclass(frozen=True)
class MetricsReport:
    ade: float
    amd: float
    n_points: int
    per_segment: Optional[list[tuple[str, float]]] = None
    flags: dict[str, int] = field(default_factory=dict)
    amd_regularized: bool = False
    units: str = "m"

    def to_dict(self) -> dict:
        return {
            "ade_m": self.ade,
            "amd": self.amd,
            "n_points": self.n_points,
            "per_segment": None
            if self.per_segment is None
            else [{"label": label, "ade_m": value} for label, value in self.per_segment],
            "flags": dict(self.flags),
            "amd_regularized": self.amd_regularized,
            "units": self.units,
        }


def _aligned(pred: Trajectory, truth: Trajectory) -> tuple[np.ndarray, np.ndarray]:
    if not np.array_equal(pred.frame_indices(), truth.frame_indices()):
        raise AlignmentError(
            f"frame indices differ: {len(pred)} predicted vs {len(truth)} ground-truth points"
        )
    if len(pred) == 0:
        raise AlignmentError("no matched frames")
    return np.ascontiguousarray(pred.positions()), np.ascontiguousarray(truth.positions())


def ade(pred: Trajectory, truth: Trajectory) -> float:
    p, t = _aligned(pred, truth)
    return float(np.mean(_kernels.displacement_norms(p, t)))


def fit_gaussian(points: np.ndarray) -> tuple[np.ndarray, np.ndarray, bool]:
    """Sample mean and covariance of ``points``; ridge-regularized when (near-)singular."""
    mean = points.mean(axis=0)
    cov = np.cov(points, rowvar=False)
    eig = np.linalg.eigvalsh(cov)
    regularized = False
    if eig[0] <= 1e-12 * max(eig[-1], 0.0) or eig[-1] <= 0.0:
        trace = float(np.trace(cov))
        ridge = 1e-9 * trace / 3.0 if trace > 0.0 else 1e-9
        cov = cov + ridge * np.eye(points.shape[1])
        regularized = True
    return mean, cov, regularized


def _covariance_factor(points: np.ndarray) -> tuple[np.ndarray, np.ndarray, bool]:
    """Mean and a lower-triangular ``L`` with ``L L^T`` the (regularized) sample covariance.

    Well-conditioned clouds are factored by QR of the centred points, which
    never forms the covariance and so does not square its condition number.
    """
    mean, cov, regularized = fit_gaussian(points)
    if regularized:
        return mean, np.linalg.cholesky(cov), True
    r = np.linalg.qr(points - mean, mode="r") / np.sqrt(len(points) - 1)
    return mean, np.ascontiguousarray(r.T), False


def amd_details(pred: Trajectory, truth: Trajectory) -> tuple[float, bool]:
    p, t = _aligned(pred, truth)
    if len(t) < 4:
        raise InvalidInputError(f"AMD needs at least 4 matched frames, got {len(t)}")
    mean, chol, regularized = _covariance_factor(t)
    return float(np.mean(_kernels.mahalanobis_norms(p, mean, chol))), regularized


def amd(pred: Trajectory, truth: Trajectory) -> float:
    return amd_details(pred, truth)[0]


def segment_ades(
    pred: Trajectory, truth: Trajectory, events: Sequence[CollisionEvent]
) -> list[tuple[str, float, int]]:
    """ADE per bounce-delimited segment as ``(label, ade, n_points)``; empty segments are dropped."""
    p, t = _aligned(pred, truth)
    errors = _kernels.displacement_norms(p, t)
    times = truth.timestamps()
    cuts = sorted(e.time for e in events if e.time is not None)
    if not cuts:
        return [("full", float(np.mean(errors)), len(errors))]
    segment_of = np.searchsorted(np.asarray(cuts), times, side="left")
    out = []
    for k in range(len(cuts) + 1):
        mask = segment_of == k
        if not mask.any():
            continue
        label = "pre-bounce" if k == 0 else f"post-bounce-{k}"
        out.append((label, float(np.mean(errors[mask])), int(mask.sum())))
    return out


def report(pred: Trajectory, truth: Trajectory, events: Sequence[CollisionEvent] = ()) -> MetricsReport:
    value = ade(pred, truth)
    amd_value, regularized = amd_details(pred, truth)
    segments = segment_ades(pred, truth, events)
    flags = {s.value: 0 for s in Source}
    for point in pred.points:
        flags[Source(point.source).value] += 1
    return MetricsReport(
        ade=value,
        amd=amd_value,
        n_points=len(pred),
        per_segment=[(label, seg_ade) for label, seg_ade, _ in segments],
        flags=flags,
        amd_regularized=regularized,
    )
