"""Observer and reflective (mirror) pinhole frustums.

Conventions: world coordinates are the room frame in millimeters; an
observer pose maps world points into the camera frame (x_cam = R x + t)
with the camera z-axis pointing away from the camera along the principal
ray. Pixels use the computer-vision convention, origin at the principal
point, x right, y down.

A mirror frustum is the observer frustum rotated half a turn about its own
x-axis and pushed distance D down the principal ray, with the intrinsic
y-axis flipped; it renders the scene the way a wall mirror at D would show
it. D only places the mirror's optical center; the rendered content is
consistent for any positive D.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AtOpticalCenter, NoHit, NonPositiveDistance
from .manifold import RigidTransform, Rotation
from .mesh import SceneMesh
from .triangulate import Ray

# world -> camera-frame rigid transform
ObserverPose = RigidTransform

# half-turn about the camera x-axis; equal to its own transpose
_R_X_PI = np.diag([1.0, -1.0, -1.0])


@dataclass(frozen=True, eq=False)
class CameraIntrinsics:
    """Upper-triangular pinhole intrinsics, all entries in pixels.

    fy is negative for mirror intrinsics (image y-axis flipped).
    """

    fx: float
    fy: float
    cx: float = 0.0
    cy: float = 0.0
    skew: float = 0.0

    def __post_init__(self):
        if not self.fx > 0:
            raise ValueError("fx must be positive")
        if self.fy == 0:
            raise ValueError("fy must be nonzero")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([
            [self.fx, self.skew, self.cx],
            [0.0, self.fy, self.cy],
            [0.0, 0.0, 1.0],
        ])

    def to_doc(self) -> dict:
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
                "skew": self.skew}

    @classmethod
    def from_doc(cls, doc: dict) -> "CameraIntrinsics":
        return cls(fx=float(doc["fx"]), fy=float(doc["fy"]), cx=float(doc.get("cx", 0.0)),
                   cy=float(doc.get("cy", 0.0)), skew=float(doc.get("skew", 0.0)))


@dataclass(frozen=True, eq=False)
class ProjectionMatrix:
    """3x4 projection, tagged by which frustum produced it."""

    matrix: np.ndarray
    role: str = "observer"  # "observer" | "mirror"

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != (3, 4):
            raise ValueError(f"projection must be 3x4, got {m.shape}")
        if np.linalg.matrix_rank(m[:, :3]) != 3:
            raise ValueError("left 3x3 block of a projection must have rank 3")
        if self.role not in ("observer", "mirror"):
            raise ValueError("role must be 'observer' or 'mirror'")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)


def camera_center(pose: ObserverPose) -> np.ndarray:
    """World-frame optical center of a world->camera pose."""
    return -(pose.rotation.matrix.T @ pose.translation)


def viewing_direction(pose: ObserverPose) -> np.ndarray:
    """World-frame unit vector along the camera's principal ray (+z)."""
    return pose.rotation.matrix.T @ np.array([0.0, 0.0, 1.0])


def observer_projection(K: CameraIntrinsics, pose: ObserverPose,
                        role: str = "observer") -> ProjectionMatrix:
    """P = K [R | t] so that a world point projects to K (R X + t)."""
    rt = np.hstack([pose.rotation.matrix, pose.translation.reshape(3, 1)])
    return ProjectionMatrix(K.matrix @ rt, role=role)


def mirror_intrinsics(K: CameraIntrinsics) -> CameraIntrinsics:
    """Flip the image y-axis: diag(1, -1, 1) K."""
    return CameraIntrinsics(fx=K.fx, fy=-K.fy, cx=K.cx, cy=-K.cy, skew=K.skew)


def mirror_pose(pose: ObserverPose, distance_mm: float) -> ObserverPose:
    """World->mirror-camera pose for a mirror D down the observer's principal ray.

    The flip-and-offset composes in the observer's local frame: the mirror
    center is the observer center displaced by D along the viewing
    direction, looking back with the same local x-axis.
    """
    if not distance_mm > 0:
        raise NonPositiveDistance(f"mirror distance must be > 0, got {distance_mm}")
    flip = RigidTransform(Rotation(_R_X_PI), np.array([0.0, 0.0, distance_mm]))
    return flip @ pose


def mirror_projection(K: CameraIntrinsics, pose: ObserverPose,
                      distance_mm: float) -> ProjectionMatrix:
    """Projection of the reversed frustum: flipped intrinsics, reversed pose."""
    return observer_projection(mirror_intrinsics(K), mirror_pose(pose, distance_mm),
                               role="mirror")


def project(P: ProjectionMatrix, point) -> tuple[np.ndarray, float]:
    """Project a world point; returns (pixel, signed depth).

    Depth is the third homogeneous coordinate; negative depth means the
    point is behind the camera and the pixel is the antipodal image.
    """
    X = np.asarray(point, dtype=float).reshape(3)
    if not np.all(np.isfinite(X)):
        raise ValueError("point must be finite")
    u, v, w = P.matrix @ np.append(X, 1.0)
    if abs(w) < 1e-12:
        raise AtOpticalCenter("point projects with near-zero homogeneous scale")
    return np.array([u / w, v / w]), float(w)


def pixel_to_ray(K: CameraIntrinsics, pose: ObserverPose, pixel) -> Ray:
    """Lift a pixel back to the world-frame viewing ray through it."""
    px = np.asarray(pixel, dtype=float).reshape(2)
    dir_cam = np.linalg.solve(K.matrix, np.array([px[0], px[1], 1.0]))
    dir_world = pose.rotation.matrix.T @ dir_cam
    dir_world = dir_world / np.linalg.norm(dir_world)
    return Ray(camera_center(pose), dir_world)


def gaze_distance(ray: Ray, mesh: SceneMesh) -> float:
    """Distance from the ray origin to its nearest mesh hit (mm)."""
    hit = mesh.first_hit(ray.origin, ray.direction)
    if hit is None:
        raise NoHit("gaze ray does not intersect the scene mesh")
    return hit[0]
