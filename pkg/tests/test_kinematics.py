import math

import numpy as np
import pytest

from telexr.core import ContractViolation, Pose, pose_distance, quat_from_axis_angle
from telexr.kinematics import (
    DEFAULT_HOME,
    ArmModel,
    DHRow,
    JointConfig,
    UnreachableError,
    default_arm,
    forward_kinematics,
    inverse_kinematics,
    jacobian,
    load_dh_table,
    parse_dh_table,
    planar_two_link,
    save_dh_table,
)

Z = np.array([0.0, 0.0, 1.0])


def two_link_ik_oracle(x, y):
    """Closed-form elbow-down IK for the unit two-link planar arm."""
    q2 = math.acos((x * x + y * y - 2.0) / 2.0)
    q1 = math.atan2(y, x) - math.atan2(math.sin(q2), 1.0 + math.cos(q2))
    return q1, q2


class TestForwardKinematics:
    def test_single_offset_row(self):
        model = ArmModel((DHRow(0, 0, 1.0, 0),), ((-1.0, 1.0),))
        pose = forward_kinematics(model, JointConfig(np.array([0.0])))
        np.testing.assert_allclose(pose.position, [0, 0, 1.0], atol=1e-15)
        np.testing.assert_allclose(pose.orientation, [1, 0, 0, 0], atol=1e-15)

    def test_two_link_straight(self):
        # oracle: hand-multiplied D-H transforms of the straight arm
        pose = forward_kinematics(planar_two_link(), JointConfig(np.zeros(2)))
        np.testing.assert_allclose(pose.position, [2.0, 0, 0], atol=1e-15)

    def test_two_link_quarter_turn(self):
        # oracle: hand-multiplied transforms, base joint at pi/2
        pose = forward_kinematics(planar_two_link(), JointConfig(np.array([math.pi / 2, 0.0])))
        np.testing.assert_allclose(pose.position, [0, 2.0, 0], atol=1e-12)
        np.testing.assert_allclose(
            pose.orientation, quat_from_axis_angle(Z, math.pi / 2), atol=1e-12
        )

    def test_out_of_limit_rejected(self):
        with pytest.raises(ContractViolation):
            forward_kinematics(planar_two_link(), JointConfig(np.array([4.0, 0.0])))

    def test_deterministic(self):
        arm = default_arm()
        q = JointConfig(DEFAULT_HOME)
        a = forward_kinematics(arm, q)
        b = forward_kinematics(arm, q)
        assert np.array_equal(a.position, b.position)
        assert np.array_equal(a.orientation, b.orientation)


def numeric_jacobian(model, q, h=1e-6):
    """Central-difference oracle for the geometric Jacobian."""
    from telexr.core import quat_multiply, quat_conjugate, quat_to_axis_angle

    base = np.asarray(q.angles, dtype=float)
    jac = np.zeros((6, model.dof))
    for i in range(model.dof):
        hi = base.copy()
        lo = base.copy()
        hi[i] += h
        lo[i] -= h
        ph = forward_kinematics(model, JointConfig(hi))
        pl = forward_kinematics(model, JointConfig(lo))
        jac[:3, i] = (ph.position - pl.position) / (2 * h)
        dq = quat_multiply(ph.orientation, quat_conjugate(pl.orientation))
        axis, angle = quat_to_axis_angle(dq)
        jac[3:, i] = axis * angle / (2 * h)
    return jac


class TestJacobian:
    def test_two_link_first_column(self):
        # finite-difference oracle confirms the distance-2 lever about z
        model = planar_two_link()
        q = JointConfig(np.zeros(2))
        jac = jacobian(model, q)
        np.testing.assert_allclose(jac[:3, 0], [0, 2.0, 0], atol=1e-12)
        np.testing.assert_allclose(jac[:3, 0], numeric_jacobian(model, q)[:3, 0], atol=1e-5)

    def test_angular_columns_are_joint_axes(self):
        arm = default_arm()
        rng = np.random.default_rng(4)
        lo, hi = arm.limits_array()
        q = JointConfig(lo + (hi - lo) * (0.3 + 0.4 * rng.random(7)))
        jac = jacobian(arm, q)
        np.testing.assert_allclose(jac[3:], numeric_jacobian(arm, q)[3:], atol=1e-5)

    def test_zero_length_arm(self):
        row = DHRow(0.0, 0.0, 0.0, 0.0)
        model = ArmModel((row, row), ((-3.0, 3.0), (-3.0, 3.0)))
        jac = jacobian(model, JointConfig(np.zeros(2)))
        np.testing.assert_allclose(jac[:3], 0.0, atol=1e-15)

    def test_matches_central_differences(self):
        arm = default_arm()
        rng = np.random.default_rng(9)
        lo, hi = arm.limits_array()
        for _ in range(10):
            q = JointConfig(lo + (hi - lo) * (0.25 + 0.5 * rng.random(7)))
            np.testing.assert_allclose(jacobian(arm, q), numeric_jacobian(arm, q), atol=1e-5)


class TestInverseKinematics:
    def test_fixed_point(self):
        arm = default_arm()
        seed = JointConfig(DEFAULT_HOME)
        target = forward_kinematics(arm, seed)
        sol = inverse_kinematics(arm, seed, target)
        np.testing.assert_allclose(sol.angles, seed.angles, atol=1e-12)

    def test_two_link_against_closed_form(self):
        model = planar_two_link()
        q1, q2 = two_link_ik_oracle(1.0, 1.0)
        oracle_pose = forward_kinematics(model, JointConfig(np.array([q1, q2])))
        np.testing.assert_allclose(oracle_pose.position, [1.0, 1.0, 0.0], atol=1e-12)
        target = Pose(np.array([1.0, 1.0, 0.0]), np.array([1.0, 0, 0, 0]))
        sol = inverse_kinematics(
            model, JointConfig(np.array([0.1, 0.1])), target, orientation_weight=0.0
        )
        fk = forward_kinematics(model, sol)
        assert np.linalg.norm(fk.position - target.position) < 1e-6

    def test_unreachable_target(self):
        model = planar_two_link()
        target = Pose(np.array([3.0, 0.0, 0.0]), np.array([1.0, 0, 0, 0]))
        with pytest.raises(UnreachableError) as exc:
            inverse_kinematics(
                model, JointConfig(np.zeros(2)), target, max_iter=120, orientation_weight=0.0
            )
        # position norm 3 is one unit beyond the reach-2 workspace
        assert exc.value.position_error > 0.5
        assert exc.value.best_q.angles.shape == (2,)

    def test_round_trip_on_random_reachable_targets(self):
        arm = default_arm()
        home = JointConfig(DEFAULT_HOME)
        lo, hi = arm.limits_array()
        rng = np.random.default_rng(20)
        converged = 0
        total = 120
        for _ in range(total):
            q = lo + (hi - lo) * (0.2 + 0.6 * rng.random(7))
            target = forward_kinematics(arm, JointConfig(q))
            try:
                sol = inverse_kinematics(
                    arm, home, target, pos_tol=1e-5, ang_tol=1e-4, max_iter=800
                )
            except UnreachableError:
                continue
            pos_err, ang_err = pose_distance(forward_kinematics(arm, sol), target)
            if pos_err < 1e-4 and ang_err < 1e-3:
                converged += 1
        assert converged >= math.ceil(0.99 * total)

    def test_limits_respected(self):
        arm = default_arm()
        lo, hi = arm.limits_array()
        target = forward_kinematics(arm, JointConfig(0.5 * (lo + hi)))
        sol = inverse_kinematics(arm, JointConfig(DEFAULT_HOME), target, max_iter=800)
        assert np.all(sol.angles >= lo) and np.all(sol.angles <= hi)


class TestDHTableIO:
    def test_round_trip(self, tmp_path):
        arm = default_arm()
        path = tmp_path / "arm.dh"
        save_dh_table(arm, path)
        back = load_dh_table(path)
        assert back == arm

    def test_parse_rejects_bad_column_count(self):
        with pytest.raises(ValueError, match="line 2"):
            parse_dh_table("# header\n0 0 0 0 -1\n")

    def test_parse_rejects_empty(self):
        with pytest.raises(ValueError, match="no joint rows"):
            parse_dh_table("# nothing here\n")

    def test_default_arm_is_seven_dof(self):
        assert default_arm().dof == 7
