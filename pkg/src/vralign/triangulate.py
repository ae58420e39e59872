"""Least-squares ray intersection and landmark misalignment metrics.

A landmark is annotated twice, by two gaze rays: the estimate x* minimizes
the summed squared perpendicular distances

    sum_i || (I - u_i u_i^T) (x - h_i) ||^2

over the rays (h_i, u_i). Paired real/virtual landmark lists are then
aggregated into per-axis mean/std statistics and their L2 combinations.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateRays, IndexOutOfRange, LengthMismatch

CONDITION_LIMIT = 1e8
LANDMARK_SOURCES = ("real", "virtual")


@dataclass(frozen=True, eq=False)
class Ray:
    """Gaze ray: origin h (head position, mm) and unit direction u."""

    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        o = np.array(self.origin, dtype=float).reshape(3)
        d = np.array(self.direction, dtype=float).reshape(3)
        if not (np.all(np.isfinite(o)) and np.all(np.isfinite(d))):
            raise ValueError("ray origin and direction must be finite")
        if abs(np.linalg.norm(d) - 1.0) > 1e-9:
            raise ValueError("ray direction must be unit length (within 1e-9)")
        o.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)

    @classmethod
    def through(cls, origin, point) -> "Ray":
        """Ray from origin toward point (normalizes the direction)."""
        origin = np.asarray(origin, dtype=float)
        delta = np.asarray(point, dtype=float) - origin
        n = np.linalg.norm(delta)
        if n == 0.0:
            raise ValueError("ray target coincides with its origin")
        return cls(origin, delta / n)

    def point_at(self, s: float) -> np.ndarray:
        return self.origin + s * self.direction


@dataclass(frozen=True, eq=False)
class Landmark:
    """A 3D point tagged by which world it was annotated in."""

    position: np.ndarray
    source: str = "virtual"
    label: str = ""
    residual: float | None = None  # set when triangulated from rays

    def __post_init__(self):
        p = np.array(self.position, dtype=float).reshape(3)
        if not np.all(np.isfinite(p)):
            raise ValueError("landmark position must be finite")
        if self.source not in LANDMARK_SOURCES:
            raise ValueError(f"source must be one of {LANDMARK_SOURCES}")
        p.setflags(write=False)
        object.__setattr__(self, "position", p)


@dataclass(frozen=True, eq=False)
class MisalignmentReport:
    """Per-axis misalignment statistics between paired landmark lists (mm).

    Per-axis differences are absolute values; stds are population stds.
    ``l2_mean_mm`` / ``l2_std_mm`` are the vector norms of the per-axis
    columns, matching how a per-axis summary table aggregates them.
    """

    mean_mm: np.ndarray
    std_mm: np.ndarray
    l2_mean_mm: float
    l2_std_mm: float
    count: int
    per_axis_mode: str = "absolute"

    def __post_init__(self):
        mean = np.array(self.mean_mm, dtype=float).reshape(3)
        std = np.array(self.std_mm, dtype=float).reshape(3)
        if np.any(std < 0):
            raise ValueError("standard deviations must be nonnegative")
        if abs(self.l2_mean_mm - np.linalg.norm(mean)) > 1e-9:
            raise ValueError("l2_mean_mm must equal the norm of the per-axis means")
        if abs(self.l2_std_mm - np.linalg.norm(std)) > 1e-9:
            raise ValueError("l2_std_mm must equal the norm of the per-axis stds")
        mean.setflags(write=False)
        std.setflags(write=False)
        object.__setattr__(self, "mean_mm", mean)
        object.__setattr__(self, "std_mm", std)

    def to_doc(self) -> dict:
        return {
            "mean_mm": list(self.mean_mm),
            "std_mm": list(self.std_mm),
            "l2_mean_mm": self.l2_mean_mm,
            "l2_std_mm": self.l2_std_mm,
            "count": self.count,
            "per_axis_mode": self.per_axis_mode,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "MisalignmentReport":
        return cls(
            np.array(doc["mean_mm"], dtype=float),
            np.array(doc["std_mm"], dtype=float),
            float(doc["l2_mean_mm"]),
            float(doc["l2_std_mm"]),
            int(doc["count"]),
            str(doc.get("per_axis_mode", "absolute")),
        )


def intersect_rays(rays, *, source: str = "virtual", label: str = "") -> Landmark:
    """Least-squares intersection of two or more gaze rays.

    Solves (sum_i (I - u_i u_i^T)) x = sum_i (I - u_i u_i^T) h_i through an
    SVD so rank problems surface as DegenerateRays instead of garbage: two
    rays triangulate badly when the user barely moved between annotations.
    """
    rays = list(rays)
    if len(rays) < 2:
        raise DegenerateRays("need at least two rays to intersect")
    A = np.zeros((3, 3))
    b = np.zeros(3)
    for ray in rays:
        proj = np.eye(3) - np.outer(ray.direction, ray.direction)
        A += proj
        b += proj @ ray.origin
    U, s, Vt = np.linalg.svd(A)
    if s[-1] <= 0.0 or s[0] / s[-1] > CONDITION_LIMIT:
        raise DegenerateRays(
            f"rays are (near-)parallel: normal-matrix condition number exceeds {CONDITION_LIMIT:.0e}"
        )
    x = Vt.T @ ((U.T @ b) / s)
    residual = 0.0
    for ray in rays:
        r = (np.eye(3) - np.outer(ray.direction, ray.direction)) @ (x - ray.origin)
        residual += float(r @ r)
    return Landmark(x, source=source, label=label, residual=residual)


def _positions(landmarks) -> np.ndarray:
    pts = [lm.position if isinstance(lm, Landmark) else np.asarray(lm, dtype=float)
           for lm in landmarks]
    return np.asarray(pts, dtype=float).reshape(-1, 3)


def pair_misalignment(real, virtual) -> MisalignmentReport:
    """Aggregate index-matched landmark pairs into a misalignment report.

    Differences are taken per axis as |virtual - real|; the sign convention
    is recorded in ``per_axis_mode`` so downstream tables are unambiguous.
    """
    real_pts = _positions(real)
    virtual_pts = _positions(virtual)
    if len(real_pts) != len(virtual_pts):
        raise LengthMismatch(f"{len(real_pts)} real vs {len(virtual_pts)} virtual landmarks")
    if len(real_pts) < 1:
        raise LengthMismatch("need at least one landmark pair")
    diffs = np.abs(virtual_pts - real_pts)
    mean = diffs.mean(axis=0)
    std = diffs.std(axis=0)  # population std
    return MisalignmentReport(
        mean_mm=mean,
        std_mm=std,
        l2_mean_mm=float(np.linalg.norm(mean)),
        l2_std_mm=float(np.linalg.norm(std)),
        count=len(real_pts),
    )


@dataclass(frozen=True, eq=False)
class DistanceCheck:
    """Absolute errors of measured landmark distances vs known spacings (mm)."""

    errors_mm: np.ndarray
    mean_error_mm: float

    def __post_init__(self):
        e = np.array(self.errors_mm, dtype=float).reshape(-1)
        e.setflags(write=False)
        object.__setattr__(self, "errors_mm", e)


def distance_check(landmarks, pairs, expected_mm) -> DistanceCheck:
    """Compare measured inter-landmark distances to expected values."""
    pts = _positions(landmarks)
    pairs = list(pairs)
    expected = [float(e) for e in expected_mm]
    if len(pairs) != len(expected):
        raise LengthMismatch(f"{len(pairs)} pairs vs {len(expected)} expected distances")
    errors = []
    for (ia, ib), exp in zip(pairs, expected):
        if not (0 <= ia < len(pts) and 0 <= ib < len(pts)):
            raise IndexOutOfRange(f"pair ({ia}, {ib}) outside 0..{len(pts) - 1}")
        errors.append(abs(float(np.linalg.norm(pts[ia] - pts[ib])) - exp))
    return DistanceCheck(np.asarray(errors), float(np.mean(errors)))
