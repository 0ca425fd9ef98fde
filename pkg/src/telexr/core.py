"""Shared geometric and temporal domain types plus pose arithmetic.

Timestamps are integer nanoseconds since the simulation epoch so that every
run is bit-deterministic. Orientations are unit quaternions in (w, x, y, z)
order; all operations that produce a quaternion renormalize it, keeping the
norm within 1e-9 of 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .pointcloud import OrganizedCloud

# Nanoseconds since simulation epoch.
Timestamp = int

NS_PER_SEC = 1_000_000_000


class ContractViolation(ValueError):
    """An operation was called with input that violates its contract."""


def to_ns(seconds: float) -> int:
    return int(round(seconds * NS_PER_SEC))


def to_seconds(ns: int) -> float:
    return ns / NS_PER_SEC


# ---------------------------------------------------------------------------
# quaternion helpers (w, x, y, z)
# ---------------------------------------------------------------------------

def quat_normalize(q: np.ndarray) -> np.ndarray:
    n = math.sqrt(float(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]))
    if n == 0.0:
        raise ContractViolation("zero-norm quaternion")
    return q / n


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vector v by unit quaternion q."""
    qv = q[1:]
    t = 2.0 * np.cross(qv, v)
    return v + q[0] * t + np.cross(qv, t)


def quat_angle(a: np.ndarray, b: np.ndarray) -> float:
    """Geodesic angle between two unit quaternions, q and -q identified."""
    d = abs(float(np.dot(a, b)))
    return 2.0 * math.acos(min(1.0, d))


def quat_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    n = float(np.linalg.norm(axis))
    if n == 0.0:
        if angle == 0.0:
            return np.array([1.0, 0.0, 0.0, 0.0])
        raise ContractViolation("zero axis with nonzero angle")
    half = 0.5 * angle
    return np.concatenate(([math.cos(half)], math.sin(half) * axis / n))


def quat_to_axis_angle(q: np.ndarray) -> tuple[np.ndarray, float]:
    """Shortest-arc axis and angle of a unit quaternion."""
    if q[0] < 0.0:
        q = -q
    s = float(np.linalg.norm(q[1:]))
    if s < 1e-12:
        return np.array([1.0, 0.0, 0.0]), 0.0
    angle = 2.0 * math.atan2(s, float(q[0]))
    return q[1:] / s, angle


def quat_slerp(a: np.ndarray, b: np.ndarray, s: float) -> np.ndarray:
    """Spherical linear interpolation along the shortest arc."""
    d = float(np.dot(a, b))
    if d < 0.0:
        b = -b
        d = -d
    if d > 1.0 - 1e-12:
        return quat_normalize(a + s * (b - a))
    theta = math.acos(min(1.0, d))
    st = math.sin(theta)
    return quat_normalize(
        (math.sin((1.0 - s) * theta) / st) * a + (math.sin(s * theta) / st) * b
    )


def rotmat_from_quat(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_from_rotmat(r: np.ndarray) -> np.ndarray:
    """Rotation matrix to quaternion via the largest-diagonal branch."""
    t = float(r[0, 0] + r[1, 1] + r[2, 2])
    if t > 0.0:
        s = math.sqrt(t + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (r[2, 1] - r[1, 2]) / s, (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s]
        )
    elif r[0, 0] >= r[1, 1] and r[0, 0] >= r[2, 2]:
        s = math.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2]) * 2.0
        q = np.array(
            [(r[2, 1] - r[1, 2]) / s, 0.25 * s, (r[0, 1] + r[1, 0]) / s, (r[0, 2] + r[2, 0]) / s]
        )
    elif r[1, 1] >= r[2, 2]:
        s = math.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2]) * 2.0
        q = np.array(
            [(r[0, 2] - r[2, 0]) / s, (r[0, 1] + r[1, 0]) / s, 0.25 * s, (r[1, 2] + r[2, 1]) / s]
        )
    else:
        s = math.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1]) * 2.0
        q = np.array(
            [(r[1, 0] - r[0, 1]) / s, (r[0, 2] + r[2, 0]) / s, (r[1, 2] + r[2, 1]) / s, 0.25 * s]
        )
    return quat_normalize(q)


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Pose:
    """Position (meters) plus unit-quaternion orientation (w, x, y, z).

    The constructor rejects orientations more than 1e-6 away from unit norm
    and renormalizes the rest, so any constructed Pose satisfies
    abs(norm - 1) < 1e-9.
    """

    position: np.ndarray
    orientation: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.position, dtype=float).reshape(3).copy()
        q = np.asarray(self.orientation, dtype=float).reshape(4).copy()
        if not np.all(np.isfinite(p)) or not np.all(np.isfinite(q)):
            raise ContractViolation("non-finite pose component")
        n = float(np.linalg.norm(q))
        if abs(n - 1.0) > 1e-6:
            raise ContractViolation(f"orientation norm {n} not within 1e-6 of 1")
        q /= n
        p.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "orientation", q)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Pose):
            return NotImplemented
        return np.array_equal(self.position, other.position) and np.array_equal(
            self.orientation, other.orientation
        )

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.zeros(3), np.array([1.0, 0.0, 0.0, 0.0]))


@dataclass(frozen=True, eq=False)
class HandSample:
    """One hand-tracking output: capture time, hand pose, fist score in [0, 1]."""

    t_start: Timestamp
    pose: Pose
    fist: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.fist <= 1.0:
            raise ContractViolation(f"fist {self.fist} outside [0, 1]")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, HandSample):
            return NotImplemented
        return (
            self.t_start == other.t_start
            and self.pose == other.pose
            and self.fist == other.fist
        )


@dataclass(frozen=True, eq=False)
class FeedbackSample:
    """Robot-side localization output ready for transmission.

    t_start_echo is the newest hand-sample timestamp in the robot's target
    queue (or the last consumed one when the queue is empty); it anchors the
    XR side's estimation window.
    """

    t_start_echo: Timestamp
    ee_pose: Pose
    gripper: float
    cloud: "OrganizedCloud | None" = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.gripper <= 1.0:
            raise ContractViolation(f"gripper {self.gripper} outside [0, 1]")


@dataclass(frozen=True, eq=False)
class FrameRecord:
    """One displayed frame: the user pose and the robot pose shown next to it.

    reconstructed=False means robot_pose_shown is a verbatim received pose.
    source_t_start is the newest hand-sample timestamp whose motion the shown
    robot pose reflects (None while nothing has been reflected yet).
    """

    display_time: Timestamp
    user_pose: Pose
    robot_pose_shown: Pose
    gripper_shown: float
    reconstructed: bool
    source_t_start: Timestamp | None


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def _require_unit(q: np.ndarray) -> None:
    if abs(float(np.linalg.norm(q)) - 1.0) > 1e-6:
        raise ContractViolation("non-unit quaternion input")


def pose_distance(a: Pose, b: Pose) -> tuple[float, float]:
    """Euclidean position error (m) and geodesic orientation error (rad)."""
    _require_unit(a.orientation)
    _require_unit(b.orientation)
    pos_err = float(np.linalg.norm(a.position - b.position))
    return pos_err, quat_angle(a.orientation, b.orientation)


def pose_interpolate(a: Pose, b: Pose, s: float) -> Pose:
    """Lerp positions, slerp orientations (shortest arc); s must be in [0, 1]."""
    if not 0.0 <= s <= 1.0:
        raise ContractViolation(f"interpolation parameter {s} outside [0, 1]")
    if s == 0.0:
        return a
    if s == 1.0:
        return b
    return Pose(
        (1.0 - s) * a.position + s * b.position,
        quat_slerp(a.orientation, b.orientation, s),
    )


def map_xr_to_robot(p: Pose, transform: Pose) -> Pose:
    """Apply the fixed rigid XR-to-robot transform to a pose."""
    return Pose(
        transform.position + quat_rotate(transform.orientation, p.position),
        quat_multiply(transform.orientation, p.orientation),
    )


def inverse_transform(t: Pose) -> Pose:
    """Rigid inverse, so map_xr_to_robot(map_xr_to_robot(p, t), inverse) == p."""
    qi = quat_conjugate(t.orientation)
    return Pose(-quat_rotate(qi, t.position), qi)
