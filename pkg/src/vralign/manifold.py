"""SO(3)/SE(3) primitives and rigid-transform averaging.

Rotations are 3x3 orthonormal matrices wrapped in :class:`Rotation`; tangent
vectors are plain length-3 numpy arrays in axis-angle form (radians).
Translations are millimeters throughout the package.

The rotation mean minimizes the sum of squared geodesic distances over the
rotation group and is paired with the ordinary Euclidean mean of the
translations; the two are averaged separately, never as a coupled SE(3)
geodesic.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DispersedInput, EmptyInput, NonConvergent

ORTHONORMALITY_TOL = 1e-9
KARCHER_GRADIENT_TOL = 1e-10
KARCHER_MAX_STEPS = 100
MEAN_UNIQUENESS_RADIUS = np.pi / 2


def hat(w) -> np.ndarray:
    """Skew-symmetric matrix of a 3-vector: hat(w) @ v == cross(w, v)."""
    x, y, z = np.asarray(w, dtype=float)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def unhat(W) -> np.ndarray:
    """Inverse of :func:`hat` for an exactly skew-symmetric matrix."""
    W = np.asarray(W, dtype=float)
    return np.array([W[2, 1], W[0, 2], W[1, 0]])


@dataclass(frozen=True, eq=False)
class Rotation:
    """Element of SO(3): a right-handed orthonormal 3x3 matrix.

    Construction validates orthonormality and det(+1) within 1e-9 and
    freezes the underlying array, so instances are safely shareable.
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != (3, 3):
            raise ValueError(f"rotation matrix must be 3x3, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("rotation matrix must be finite")
        if np.max(np.abs(m.T @ m - np.eye(3))) > ORTHONORMALITY_TOL:
            raise ValueError("matrix is not orthonormal within 1e-9")
        if abs(np.linalg.det(m) - 1.0) > ORTHONORMALITY_TOL:
            raise ValueError("matrix determinant must be +1 within 1e-9")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls) -> "Rotation":
        return cls(np.eye(3))

    @classmethod
    def from_axis_angle(cls, axis, angle_rad: float) -> "Rotation":
        axis = np.asarray(axis, dtype=float)
        n = np.linalg.norm(axis)
        if n == 0.0:
            raise ValueError("axis must be nonzero")
        return so3_exp(axis / n * angle_rad)

    @classmethod
    def from_quaternion_wxyz(cls, q) -> "Rotation":
        return cls(quaternion_wxyz_to_matrix(q))

    def as_quaternion_wxyz(self) -> np.ndarray:
        return matrix_to_quaternion_wxyz(self.matrix)

    def inverse(self) -> "Rotation":
        return Rotation(self.matrix.T)

    def apply(self, points) -> np.ndarray:
        """Rotate one (3,) point or an (N, 3) stack of points."""
        pts = np.asarray(points, dtype=float)
        return pts @ self.matrix.T

    def __matmul__(self, other: "Rotation") -> "Rotation":
        return Rotation(self.matrix @ other.matrix)

    def isclose(self, other: "Rotation", tol: float = 1e-9) -> bool:
        return bool(np.max(np.abs(self.matrix - other.matrix)) <= tol)


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Rigid-body transform (rotation, translation) acting as x -> R x + t.

    Translation is in millimeters.
    """

    rotation: Rotation
    translation: np.ndarray

    def __post_init__(self):
        rot = self.rotation
        if not isinstance(rot, Rotation):
            rot = Rotation(rot)
        t = np.array(self.translation, dtype=float).reshape(3)
        if not np.all(np.isfinite(t)):
            raise ValueError("translation must be finite")
        t.setflags(write=False)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(Rotation.identity(), np.zeros(3))

    @classmethod
    def from_matrix(cls, m) -> "RigidTransform":
        m = np.asarray(m, dtype=float)
        if m.shape != (4, 4) or np.max(np.abs(m[3] - [0, 0, 0, 1])) > 1e-9:
            raise ValueError("expected a homogeneous 4x4 matrix")
        return cls(Rotation(m[:3, :3]), m[:3, 3])

    def as_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation.matrix
        m[:3, 3] = self.translation
        return m

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.matrix.T
        return RigidTransform(Rotation(rt), -(rt @ self.translation))

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return pts @ self.rotation.matrix.T + self.translation

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        # (self o other)(x) = self(other(x))
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation.matrix @ other.translation + self.translation,
        )

    def isclose(self, other: "RigidTransform", tol: float = 1e-9) -> bool:
        return self.rotation.isclose(other.rotation, tol) and bool(
            np.max(np.abs(self.translation - other.translation)) <= tol
        )

    def to_doc(self) -> dict:
        """Loss-free dict form (full rotation matrix, not a quaternion)."""
        return {
            "rotation": [list(row) for row in self.rotation.matrix],
            "translation_mm": list(self.translation),
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "RigidTransform":
        return cls(Rotation(np.array(doc["rotation"], dtype=float)),
                   np.array(doc["translation_mm"], dtype=float))


def _as_matrix(r) -> np.ndarray:
    return r.matrix if isinstance(r, Rotation) else np.asarray(r, dtype=float)


def so3_exp(w) -> Rotation:
    """Rodrigues map from an axis-angle 3-vector (radians) to a rotation."""
    w = np.asarray(w, dtype=float).reshape(3)
    if not np.all(np.isfinite(w)):
        raise ValueError("tangent vector must be finite")
    theta = float(np.linalg.norm(w))
    W = hat(w)
    if theta < 1e-8:
        # second-order series: exact at zero, error O(theta^3)
        R = np.eye(3) + W + 0.5 * (W @ W)
    else:
        K = W / theta
        R = np.eye(3) + np.sin(theta) * K + (1.0 - np.cos(theta)) * (K @ K)
    return Rotation(R)


def so3_log(R) -> np.ndarray:
    """Canonical log map: returns w with ||w|| in [0, pi] and exp(w) == R.

    At a half-turn the log is two-valued; the axis is then taken from the
    dominant eigenvector of (R + I)/2 with its first nonzero component made
    positive, so the output is deterministic.
    """
    m = _as_matrix(R)
    v = 0.5 * np.array([m[2, 1] - m[1, 2], m[0, 2] - m[2, 0], m[1, 0] - m[0, 1]])
    s = float(np.linalg.norm(v))          # |sin(theta)|
    c = 0.5 * (float(np.trace(m)) - 1.0)  # cos(theta)
    c = min(1.0, max(-1.0, c))
    theta = float(np.arctan2(s, c))
    if s < 1e-8:
        if c > 0.0:
            # theta ~ 0: w = v * theta/sin(theta), series in theta
            return v * (1.0 + theta * theta / 6.0)
        # theta ~ pi: (R + I)/2 is a*a^T up to O(pi - theta)
        vals, vecs = np.linalg.eigh(0.5 * (m + np.eye(3)))
        axis = vecs[:, int(np.argmax(vals))]
        axis = axis / np.linalg.norm(axis)
        for comp in axis:
            if abs(comp) > 1e-12:
                if comp < 0.0:
                    axis = -axis
                break
        return theta * axis
    return v * (theta / s)


def geodesic_distance(a, b) -> float:
    """Riemannian distance on SO(3): the angle of the relative rotation."""
    rel = _as_matrix(a).T @ _as_matrix(b)
    return float(np.linalg.norm(so3_log(rel)))


def rotation_mean(rotations) -> Rotation:
    """Karcher mean: the minimizer of the summed squared geodesic distances.

    Inputs must lie within geodesic radius pi/2 of the first element so the
    mean is unique. Initialized at the chordal mean (polar projection of the
    arithmetic matrix mean); fixed-point iteration stops when the gradient
    norm ||sum_i log(R^T R_i)|| drops below 1e-10.
    """
    rotations = list(rotations)
    if not rotations:
        raise EmptyInput("rotation_mean needs at least one rotation")
    mats = [_as_matrix(r) for r in rotations]
    if len(mats) == 1:
        return rotations[0] if isinstance(rotations[0], Rotation) else Rotation(mats[0])
    first = mats[0]
    if all(np.array_equal(first, m) for m in mats[1:]):
        return rotations[0] if isinstance(rotations[0], Rotation) else Rotation(first)
    for i, m in enumerate(mats[1:], start=1):
        d = geodesic_distance(first, m)
        if d >= MEAN_UNIQUENESS_RADIUS:
            raise DispersedInput(
                f"rotation {i} is {d:.4f} rad from the first input; "
                f"mean is only defined within {MEAN_UNIQUENESS_RADIUS:.4f} rad"
            )
    # chordal initialization: polar factor of the arithmetic mean
    mean_mat = np.mean(mats, axis=0)
    U, _, Vt = np.linalg.svd(mean_mat)
    R = U @ np.diag([1.0, 1.0, float(np.sign(np.linalg.det(U @ Vt)))]) @ Vt
    n = len(mats)
    for _ in range(KARCHER_MAX_STEPS):
        grad = np.zeros(3)
        for m in mats:
            grad += so3_log(R.T @ m)
        if np.linalg.norm(grad) < KARCHER_GRADIENT_TOL:
            return Rotation(R)
        R = R @ so3_exp(grad / n).matrix
    raise NonConvergent(
        f"Karcher iteration did not reach gradient norm {KARCHER_GRADIENT_TOL} "
        f"within {KARCHER_MAX_STEPS} steps"
    )


def translation_mean(translations) -> np.ndarray:
    """Componentwise arithmetic mean of 3-vectors (mm)."""
    translations = list(translations)
    if not translations:
        raise EmptyInput("translation_mean needs at least one translation")
    return np.mean(np.asarray(translations, dtype=float).reshape(-1, 3), axis=0)


def transform_mean(transforms) -> RigidTransform:
    """Mean rigid transform: Karcher mean rotation + Euclidean mean translation."""
    transforms = list(transforms)
    if not transforms:
        raise EmptyInput("transform_mean needs at least one transform")
    if len(transforms) == 1:
        return transforms[0]
    return RigidTransform(
        rotation_mean([t.rotation for t in transforms]),
        translation_mean([t.translation for t in transforms]),
    )


def quaternion_wxyz_to_matrix(q) -> np.ndarray:
    """Rotation matrix of a (w, x, y, z) quaternion; normalizes the input."""
    q = np.asarray(q, dtype=float).reshape(4)
    n = np.linalg.norm(q)
    if n == 0.0 or not np.all(np.isfinite(q)):
        raise ValueError("quaternion must be finite and nonzero")
    w, x, y, z = q / n
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def matrix_to_quaternion_wxyz(m) -> np.ndarray:
    """Quaternion (w, x, y, z) of a rotation matrix, with w >= 0."""
    m = _as_matrix(m)
    tr = float(np.trace(m))
    # pick the numerically largest component first (Shepperd's method)
    candidates = [tr, m[0, 0], m[1, 1], m[2, 2]]
    case = int(np.argmax(candidates))
    if case == 0:
        w = 0.5 * np.sqrt(1.0 + tr)
        f = 0.25 / w
        q = np.array([w, f * (m[2, 1] - m[1, 2]), f * (m[0, 2] - m[2, 0]),
                      f * (m[1, 0] - m[0, 1])])
    elif case == 1:
        x = 0.5 * np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2])
        f = 0.25 / x
        q = np.array([f * (m[2, 1] - m[1, 2]), x, f * (m[0, 1] + m[1, 0]),
                      f * (m[0, 2] + m[2, 0])])
    elif case == 2:
        y = 0.5 * np.sqrt(1.0 - m[0, 0] + m[1, 1] - m[2, 2])
        f = 0.25 / y
        q = np.array([f * (m[0, 2] - m[2, 0]), f * (m[0, 1] + m[1, 0]), y,
                      f * (m[1, 2] + m[2, 1])])
    else:
        z = 0.5 * np.sqrt(1.0 - m[0, 0] - m[1, 1] + m[2, 2])
        f = 0.25 / z
        q = np.array([f * (m[1, 0] - m[0, 1]), f * (m[0, 2] + m[2, 0]),
                      f * (m[1, 2] + m[2, 1]), z])
    q = q / np.linalg.norm(q)
    return -q if q[0] < 0 else q
