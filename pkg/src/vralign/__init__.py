"""Desk-scale virtual-real alignment engine.

Average noisy rigid-body registrations on the rotation manifold, build
reflective (mirror) camera frustums for multi-view overlay, triangulate
landmarks from gaze rays, and drive/score joint-by-joint robot set-up,
with a Monte Carlo harness and an interactive workbench service on top.
"""

from .camera import (
    CameraIntrinsics,
    ObserverPose,
    ProjectionMatrix,
    gaze_distance,
    mirror_intrinsics,
    mirror_pose,
    mirror_projection,
    observer_projection,
    pixel_to_ray,
    project,
)
from .errors import WorkbenchError
from .manifold import (
    RigidTransform,
    Rotation,
    geodesic_distance,
    rotation_mean,
    so3_exp,
    so3_log,
    transform_mean,
    translation_mean,
)
from .mesh import SceneMesh, icosphere, make_box, make_quad
from .robot import (
    JointClass,
    JointConfig,
    JointSpec,
    RobotDescription,
    classify_joint,
    forward_kinematics,
    joint_config_error,
    load_robot,
    save_robot,
)
from .session import AlignmentSession, GuidancePlan, RegistrationResult
from .sim import (
    ExperimentConfig,
    ExperimentReport,
    NoiseModel,
    emit_report,
    run_alignment_experiment,
    sample_user_alignment,
)
from .triangulate import (
    Landmark,
    MisalignmentReport,
    Ray,
    distance_check,
    intersect_rays,
    pair_misalignment,
)

__version__ = "0.1.0"
