"""Serial-manipulator description, forward kinematics, and joint metrics.

A robot is an ordered chain of revolute joints. Each joint spec holds the
fixed transform from its parent link frame into the joint frame, the
rotation axis expressed in the joint frame, joint limits in degrees, and
the rigid link vector from the joint frame to the child link frame.

Angles are degrees at the interface (matching how set-up errors are
reported) and radians internally.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import LengthMismatch, SchemaError, ZeroLink
from .manifold import (
    RigidTransform,
    Rotation,
    matrix_to_quaternion_wxyz,
    quaternion_wxyz_to_matrix,
    so3_exp,
)

ROBOT_SCHEMA = "robot-description/v1"

# twisting if the axis is nearer parallel to the link than orthogonal
TWIST_SPLIT_DEG = 45.0


class JointClass(Enum):
    TWISTING = "twisting"
    REVOLVING = "revolving"


@dataclass(frozen=True, eq=False)
class JointSpec:
    fixed: RigidTransform
    axis: np.ndarray
    limits_deg: tuple
    link_mm: np.ndarray

    def __post_init__(self):
        axis = np.array(self.axis, dtype=float).reshape(3)
        if abs(np.linalg.norm(axis) - 1.0) > 1e-9:
            raise ValueError("joint axis must be unit length")
        link = np.array(self.link_mm, dtype=float).reshape(3)
        if not np.all(np.isfinite(link)):
            raise ValueError("link vector must be finite")
        lo, hi = (float(self.limits_deg[0]), float(self.limits_deg[1]))
        if not lo < hi:
            raise ValueError(f"joint limits must satisfy lo < hi, got [{lo}, {hi}]")
        axis.setflags(write=False)
        link.setflags(write=False)
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "link_mm", link)
        object.__setattr__(self, "limits_deg", (lo, hi))


@dataclass(frozen=True, eq=False)
class RobotDescription:
    joints: tuple
    base: RigidTransform = field(default_factory=RigidTransform.identity)
    name: str = "robot"
    # optional display mesh reference per link (path or null), same length
    # as joints; rendering is the only consumer
    link_meshes: tuple | None = None

    def __post_init__(self):
        joints = tuple(self.joints)
        if len(joints) < 1:
            raise ValueError("a robot needs at least one joint")
        object.__setattr__(self, "joints", joints)
        if self.link_meshes is not None:
            meshes = tuple(self.link_meshes)
            if len(meshes) != len(joints):
                raise ValueError("link_meshes must have one entry per joint")
            object.__setattr__(self, "link_meshes", meshes)

    @property
    def joint_count(self) -> int:
        return len(self.joints)

    def assert_within_limits(self, config: "JointConfig") -> None:
        angles = config.angles_deg
        for j, (angle, spec) in enumerate(zip(angles, self.joints)):
            lo, hi = spec.limits_deg
            if not lo <= angle <= hi:
                raise ValueError(
                    f"joint {j}: angle {angle} deg outside limits [{lo}, {hi}]"
                )


@dataclass(frozen=True, eq=False)
class JointConfig:
    """Joint-angle vector in degrees; ``physical`` marks limit-checked configs."""

    angles_deg: np.ndarray
    physical: bool = False

    def __post_init__(self):
        a = np.array(self.angles_deg, dtype=float).reshape(-1)
        if not np.all(np.isfinite(a)):
            raise ValueError("joint angles must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "angles_deg", a)

    def __len__(self) -> int:
        return len(self.angles_deg)


def _as_angles(config) -> np.ndarray:
    if isinstance(config, JointConfig):
        return config.angles_deg
    return np.asarray(config, dtype=float).reshape(-1)


def forward_kinematics(desc: RobotDescription, config) -> list:
    """World-frame pose of every link, base to tip.

    Pose k is base composed with fixed_j * rot(axis_j, q_j) * link_j for all
    joints j <= k; the last entry is the end-effector pose.
    """
    angles = _as_angles(config)
    if len(angles) != desc.joint_count:
        raise LengthMismatch(
            f"config has {len(angles)} angles for a {desc.joint_count}-joint robot"
        )
    poses = []
    current = desc.base
    for spec, angle_deg in zip(desc.joints, angles):
        spin = RigidTransform(so3_exp(spec.axis * np.deg2rad(angle_deg)), np.zeros(3))
        link = RigidTransform(Rotation.identity(), spec.link_mm)
        current = current @ spec.fixed @ spin @ link
        poses.append(current)
    return poses


def classify_joint(desc: RobotDescription, index: int) -> JointClass:
    """Twisting when the rotation axis is nearer parallel to its link than
    orthogonal (45-degree split); a zero link defers to the next nonzero one."""
    if not 0 <= index < desc.joint_count:
        raise IndexError(f"joint index {index} outside 0..{desc.joint_count - 1}")
    axis = desc.joints[index].axis
    link = None
    for spec in desc.joints[index:]:
        n = np.linalg.norm(spec.link_mm)
        if n > 0:
            link = spec.link_mm / n
            break
    if link is None:
        raise ZeroLink(f"joint {index} has no nonzero link at or after it")
    cos_angle = abs(float(np.dot(axis, link)))
    if cos_angle > np.cos(np.deg2rad(TWIST_SPLIT_DEG)):
        return JointClass.TWISTING
    return JointClass.REVOLVING


def classify_joints(desc: RobotDescription) -> list:
    return [classify_joint(desc, j) for j in range(desc.joint_count)]


@dataclass(frozen=True, eq=False)
class JointErrorSummary:
    """Absolute per-joint angle errors in degrees with summary statistics."""

    per_joint_deg: np.ndarray
    mean: float
    median: float
    min: float
    max: float
    std: float

    def __post_init__(self):
        e = np.array(self.per_joint_deg, dtype=float).reshape(-1)
        e.setflags(write=False)
        object.__setattr__(self, "per_joint_deg", e)

    def to_doc(self) -> dict:
        return {
            "per_joint_deg": list(self.per_joint_deg),
            "mean": self.mean, "median": self.median,
            "min": self.min, "max": self.max, "std": self.std,
        }


def joint_config_error(target, actual) -> JointErrorSummary:
    """Per-joint |target - actual| in degrees, without modular wrapping.

    Joint ranges are limited, so a 249-degree miss is a real 249-degree
    miss, not a wrapped 111; summary stats use the population std.
    """
    t = _as_angles(target)
    a = _as_angles(actual)
    if len(t) != len(a):
        raise LengthMismatch(f"{len(t)} target angles vs {len(a)} actual angles")
    err = np.abs(t - a)
    return JointErrorSummary(
        per_joint_deg=err,
        mean=float(err.mean()),
        median=float(np.median(err)),
        min=float(err.min()),
        max=float(err.max()),
        std=float(err.std()),
    )


# --- robot description documents ---

def _pose_to_pair(t: RigidTransform) -> list:
    return [[float(v) for v in matrix_to_quaternion_wxyz(t.rotation.matrix)],
            [float(v) for v in t.translation]]


def _pose_from_pair(pair, where: str) -> RigidTransform:
    try:
        quat, trans = pair
        return RigidTransform(Rotation(quaternion_wxyz_to_matrix(quat)),
                              np.asarray(trans, dtype=float))
    except (ValueError, TypeError) as exc:
        raise SchemaError(f"{where}: expected [quaternion wxyz, translation mm]: {exc}") from exc


def robot_to_doc(desc: RobotDescription) -> dict:
    out = {
        "schema": ROBOT_SCHEMA,
        "name": desc.name,
        "base_pose": _pose_to_pair(desc.base),
        "joints": [
            {
                "fixed_pose": _pose_to_pair(spec.fixed),
                "axis": [float(v) for v in spec.axis],
                "limits_deg": [spec.limits_deg[0], spec.limits_deg[1]],
                "link_mm": [float(v) for v in spec.link_mm],
            }
            for spec in desc.joints
        ],
    }
    if desc.link_meshes is not None:
        out["link_meshes"] = list(desc.link_meshes)
    return out


def robot_from_doc(doc: dict) -> RobotDescription:
    """Parse a robot-description document, validating as it goes."""
    if not isinstance(doc, dict):
        raise SchemaError("robot document must be an object")
    if doc.get("schema") != ROBOT_SCHEMA:
        raise SchemaError(f"unsupported schema tag {doc.get('schema')!r}, "
                          f"expected {ROBOT_SCHEMA!r}")
    if "joints" not in doc or not isinstance(doc["joints"], list) or not doc["joints"]:
        raise SchemaError("robot document needs a non-empty 'joints' list")
    joints = []
    for j, rec in enumerate(doc["joints"]):
        where = f"joints[{j}]"
        for key in ("fixed_pose", "axis", "limits_deg", "link_mm"):
            if key not in rec:
                raise SchemaError(f"{where}: missing field {key!r}")
        try:
            joints.append(JointSpec(
                fixed=_pose_from_pair(rec["fixed_pose"], where),
                axis=np.asarray(rec["axis"], dtype=float),
                limits_deg=(rec["limits_deg"][0], rec["limits_deg"][1]),
                link_mm=np.asarray(rec["link_mm"], dtype=float),
            ))
        except ValueError as exc:
            raise SchemaError(f"{where}: {exc}") from exc
    base = _pose_from_pair(doc["base_pose"], "base_pose") if "base_pose" in doc \
        else RigidTransform.identity()
    link_meshes = tuple(doc["link_meshes"]) if "link_meshes" in doc else None
    if link_meshes is not None and len(link_meshes) != len(joints):
        raise SchemaError("link_meshes must have one entry per joint")
    return RobotDescription(joints=tuple(joints), base=base,
                            name=str(doc.get("name", "robot")),
                            link_meshes=link_meshes)


def load_robot(path) -> RobotDescription:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read robot file {path}: {exc}") from exc
    return robot_from_doc(doc)


def save_robot(desc: RobotDescription, path) -> None:
    Path(path).write_text(json.dumps(robot_to_doc(desc), indent=2) + "\n",
                          encoding="utf-8")
