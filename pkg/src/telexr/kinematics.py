"""7-DOF manipulator model: D-H forward kinematics, geometric Jacobian, and
damped-least-squares inverse kinematics with per-iteration joint-limit
clamping."""

from __future__ import annotations

import importlib.resources
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    ContractViolation,
    Pose,
    quat_conjugate,
    quat_from_rotmat,
    quat_multiply,
    quat_to_axis_angle,
)


class UnreachableError(Exception):
    """IK did not converge; carries the best-effort solution and residuals."""

    def __init__(self, best_q: "JointConfig", position_error: float, angle_error: float):
        super().__init__(
            f"IK did not converge (residual {position_error:.3e} m, {angle_error:.3e} rad)"
        )
        self.best_q = best_q
        self.position_error = position_error
        self.angle_error = angle_error


@dataclass(frozen=True)
class DHRow:
    """One Denavit-Hartenberg joint row (a, alpha, d, theta_offset)."""

    a: float
    alpha: float
    d: float
    theta_offset: float

    def __post_init__(self) -> None:
        for name in ("a", "alpha", "d", "theta_offset"):
            if not math.isfinite(getattr(self, name)):
                raise ContractViolation(f"non-finite D-H parameter {name}")


@dataclass(frozen=True)
class ArmModel:
    """Ordered D-H rows plus per-joint [min, max] limits in radians."""

    rows: tuple[DHRow, ...]
    joint_limits: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if len(self.rows) != len(self.joint_limits):
            raise ContractViolation("row count and joint limit count differ")
        for lo, hi in self.joint_limits:
            if not lo < hi:
                raise ContractViolation(f"joint limit [{lo}, {hi}] has min >= max")

    @property
    def dof(self) -> int:
        return len(self.rows)

    def limits_array(self) -> tuple[np.ndarray, np.ndarray]:
        lims = np.asarray(self.joint_limits, dtype=float)
        return lims[:, 0], lims[:, 1]


@dataclass(frozen=True, eq=False)
class JointConfig:
    """Joint angles in radians."""

    angles: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.angles, dtype=float).reshape(-1).copy()
        a.setflags(write=False)
        object.__setattr__(self, "angles", a)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, JointConfig):
            return NotImplemented
        return np.array_equal(self.angles, other.angles)


# Home configuration for the bundled 7-DOF arm: elbow bent, away from limits.
DEFAULT_HOME = np.array([0.0, 0.4, 0.0, 1.4, 0.0, 1.0, 0.0])


def _check_limits(model: ArmModel, q: np.ndarray) -> None:
    if q.shape != (model.dof,):
        raise ContractViolation(f"expected {model.dof} joint angles, got {q.shape}")
    lo, hi = model.limits_array()
    if np.any(q < lo - 1e-9) or np.any(q > hi + 1e-9):
        raise ContractViolation("joint angles outside limits")


def dh_transform(row: DHRow, theta: float) -> np.ndarray:
    """Homogeneous transform RotZ(theta) TransZ(d) TransX(a) RotX(alpha)."""
    ct, st = math.cos(theta), math.sin(theta)
    ca, sa = math.cos(row.alpha), math.sin(row.alpha)
    return np.array(
        [
            [ct, -st * ca, st * sa, row.a * ct],
            [st, ct * ca, -ct * sa, row.a * st],
            [0.0, sa, ca, row.d],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )


def fk_chain(model: ArmModel, q: JointConfig) -> list[np.ndarray]:
    """Cumulative transforms [T_0 .. T_n] with T_0 the identity."""
    angles = np.asarray(q.angles, dtype=float)
    _check_limits(model, angles)
    chain = [np.eye(4)]
    t = np.eye(4)
    for row, theta in zip(model.rows, angles):
        t = t @ dh_transform(row, theta + row.theta_offset)
        chain.append(t)
    return chain


def forward_kinematics(model: ArmModel, q: JointConfig) -> Pose:
    """End-effector pose as the product of the D-H transforms."""
    t = fk_chain(model, q)[-1]
    return Pose(t[:3, 3], quat_from_rotmat(t[:3, :3]))


def jacobian(model: ArmModel, q: JointConfig) -> np.ndarray:
    """Geometric Jacobian, 6 x dof: linear rows on top, angular below."""
    chain = fk_chain(model, q)
    pe = chain[-1][:3, 3]
    jac = np.zeros((6, model.dof))
    for i in range(model.dof):
        z = chain[i][:3, 2]
        p = chain[i][:3, 3]
        jac[:3, i] = np.cross(z, pe - p)
        jac[3:, i] = z
    return jac


def _pose_error(target: Pose, current_t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Position delta and axis-angle orientation error in the base frame."""
    dp = target.position - current_t[:3, 3]
    q_cur = quat_from_rotmat(current_t[:3, :3])
    q_err = quat_multiply(target.orientation, quat_conjugate(q_cur))
    axis, angle = quat_to_axis_angle(q_err)
    return dp, axis * angle


def inverse_kinematics(
    model: ArmModel,
    seed: JointConfig,
    target: Pose,
    pos_tol: float = 1e-6,
    ang_tol: float = 1e-5,
    max_iter: int = 200,
    damping: float = 0.05,
    step_limit: float = 0.5,
    orientation_weight: float = 1.0,
) -> JointConfig:
    """Damped-least-squares IK clamped to joint limits each iteration.

    orientation_weight scales the angular error rows; 0 solves position only
    (needed for arms that cannot realize arbitrary orientations). Raises
    UnreachableError with the best-effort solution on non-convergence.
    """
    if pos_tol <= 0 or ang_tol <= 0:
        raise ContractViolation("tolerances must be positive")
    lo, hi = model.limits_array()
    q = np.clip(np.asarray(seed.angles, dtype=float).copy(), lo, hi)
    best_q = q.copy()
    best_score = math.inf
    best_pos = math.inf
    best_ang = math.inf
    w = orientation_weight
    stall = 0
    jiggled = False
    restart_rng = np.random.default_rng(0x7E1E)
    eye6 = np.eye(6)
    for _ in range(max_iter):
        chain = fk_chain(model, JointConfig(q))
        dp, drot = _pose_error(target, chain[-1])
        pos_err = float(np.linalg.norm(dp))
        ang_err = float(np.linalg.norm(drot))
        score = pos_err + 0.1 * w * ang_err
        if score < best_score:
            # sub-0.1% progress per iteration is limit sliding, not
            # convergence; let the stall counter keep running for it
            if score < best_score * (1.0 - 1e-3):
                stall = 0
            else:
                stall += 1
            best_score = score
            best_pos = pos_err
            best_ang = ang_err
            best_q = q.copy()
        else:
            stall += 1
        if pos_err < pos_tol and (w == 0.0 or ang_err < ang_tol):
            return JointConfig(q)
        if stall >= 15:
            # stuck: in a local minimum (wrist lock, joint-limit trap, or a
            # wrong solution branch). Near the tolerance box jiggle around
            # the best solution once, otherwise restart from scratch.
            near = best_pos < 10.0 * pos_tol and (w == 0.0 or best_ang < 10.0 * ang_tol)
            if near and not jiggled:
                q = np.clip(
                    best_q + restart_rng.uniform(-0.03, 0.03, model.dof), lo, hi
                )
                jiggled = True
            else:
                margin = 0.1 * (hi - lo)
                q = restart_rng.uniform(lo + margin, hi - margin)
                jiggled = False
            stall = 0
            continue
        # error clamp keeps far targets from demanding huge steps
        if pos_err > 0.2:
            dp = dp * (0.2 / pos_err)
        if ang_err > 0.5:
            drot = drot * (0.5 / ang_err)
        jac = jacobian(model, JointConfig(q))
        jac[3:] *= w
        err = np.concatenate([dp, w * drot])
        # Levenberg-style: damping shrinks with the residual for fast
        # terminal convergence while staying regularized far away
        lam = max(1e-4, damping * min(1.0, score))
        a = jac @ jac.T + (lam * lam) * eye6
        dq = jac.T @ np.linalg.solve(a, err)
        peak = float(np.max(np.abs(dq)))
        if peak > step_limit:
            dq *= step_limit / peak
        q = np.clip(q + dq, lo, hi)
    chain = fk_chain(model, JointConfig(best_q))
    dp, drot = _pose_error(target, chain[-1])
    raise UnreachableError(
        JointConfig(best_q), float(np.linalg.norm(dp)), float(np.linalg.norm(drot))
    )


# ---------------------------------------------------------------------------
# D-H table file I/O
# ---------------------------------------------------------------------------
# Plain text, one joint per line, columns: a alpha d theta_offset min max
# (meters and radians). Lines starting with # are comments.

def load_dh_table(path: str | Path) -> ArmModel:
    return parse_dh_table(Path(path).read_text())


def parse_dh_table(text: str) -> ArmModel:
    rows: list[DHRow] = []
    limits: list[tuple[float, float]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 6:
            raise ValueError(f"D-H table line {lineno}: expected 6 columns, got {len(parts)}")
        try:
            a, alpha, d, off, lo, hi = (float(p) for p in parts)
        except ValueError as exc:
            raise ValueError(f"D-H table line {lineno}: {exc}") from None
        rows.append(DHRow(a, alpha, d, off))
        limits.append((lo, hi))
    if not rows:
        raise ValueError("D-H table contains no joint rows")
    return ArmModel(tuple(rows), tuple(limits))


def save_dh_table(model: ArmModel, path: str | Path) -> None:
    lines = ["# columns: a alpha d theta_offset limit_min limit_max (meters, radians)"]
    for row, (lo, hi) in zip(model.rows, model.joint_limits):
        lines.append(
            f"{row.a!r} {row.alpha!r} {row.d!r} {row.theta_offset!r} {lo!r} {hi!r}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def default_arm() -> ArmModel:
    """The generic 7-DOF arm bundled with the package."""
    text = (
        importlib.resources.files("telexr").joinpath("data/generic7.dh").read_text()
    )
    return parse_dh_table(text)


def planar_two_link() -> ArmModel:
    """Two revolute joints with unit links in the XY plane; handy for tests."""
    row = DHRow(a=1.0, alpha=0.0, d=0.0, theta_offset=0.0)
    return ArmModel((row, row), ((-math.pi, math.pi), (-math.pi, math.pi)))
