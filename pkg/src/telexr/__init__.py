"""Dual-reconstruction XR teleoperation simulator.

Two pipelines (XR-side control capture, robot-side feedback) exchange state
over degradable network channels; each side locally reconstructs the
counterpart's delayed or missing state. The package also provides a
contention-aware pipeline scheduler and bandwidth-adaptive point cloud
scaling, bound together by a deterministic discrete-event harness.
"""

from .core import (
    ContractViolation,
    FeedbackSample,
    FrameRecord,
    HandSample,
    Pose,
    Timestamp,
    inverse_transform,
    map_xr_to_robot,
    pose_distance,
    pose_interpolate,
)
from .kinematics import (
    ArmModel,
    DHRow,
    JointConfig,
    UnreachableError,
    default_arm,
    forward_kinematics,
    inverse_kinematics,
    jacobian,
    load_dh_table,
)

__all__ = [
    "ArmModel",
    "ContractViolation",
    "DHRow",
    "FeedbackSample",
    "FrameRecord",
    "HandSample",
    "JointConfig",
    "Pose",
    "Timestamp",
    "UnreachableError",
    "default_arm",
    "forward_kinematics",
    "inverse_kinematics",
    "inverse_transform",
    "jacobian",
    "load_dh_table",
    "map_xr_to_robot",
    "pose_distance",
    "pose_interpolate",
]
