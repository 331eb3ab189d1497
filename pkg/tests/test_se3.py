import math

import numpy as np
import pytest

from policyvo import se3
from policyvo.se3 import Pose


def random_full_range_rotation(rng):
    """Uniform-axis rotation with angle uniform in [0, pi - 1e-3]."""
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(0.0, math.pi - 1e-3)
    return se3.so3_exp(axis * angle)


def quat_dot_angle(rot_a, rot_b):
    """Independent geodesic oracle: 2*arccos(|q_a . q_b|)."""
    qa = se3.rotation_to_quat(rot_a)
    qb = se3.rotation_to_quat(rot_b)
    return 2.0 * math.acos(min(1.0, abs(float(np.dot(qa, qb)))))


class TestCompose:
    def test_identity(self):
        t = se3.random_pose(3, 2.0, 0.4)
        out = se3.compose(Pose.identity(), t)
        np.testing.assert_allclose(out.as_matrix(), t.as_matrix(), atol=1e-12)

    def test_inverse_gives_identity(self):
        t = se3.random_pose(4, 2.0, 0.4)
        out = se3.compose(t, se3.inverse(t))
        np.testing.assert_allclose(out.as_matrix(), np.eye(4), atol=1e-9)

    def test_hand_matrix_oracle(self):
        # rotZ(pi/2) with t=(1,0,0) squared -> rotZ(pi) with t=(1,1,0)
        a = Pose(se3.rot_z(math.pi / 2), [1.0, 0.0, 0.0])
        out = se3.compose(a, a)
        np.testing.assert_allclose(out.rotation, se3.rot_z(math.pi), atol=1e-12)
        np.testing.assert_allclose(out.translation, [1.0, 1.0, 0.0], atol=1e-12)

    def test_matches_4x4_product(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            a = se3.random_pose(rng, 3.0, 0.8)
            b = se3.random_pose(rng, 3.0, 0.8)
            expected = a.as_matrix() @ b.as_matrix()
            np.testing.assert_allclose(se3.compose(a, b).as_matrix(), expected, atol=1e-12)

    def test_associativity(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            a, b, c = (se3.random_pose(rng, 3.0, 0.8) for _ in range(3))
            left = se3.compose(se3.compose(a, b), c)
            right = se3.compose(a, se3.compose(b, c))
            np.testing.assert_allclose(left.as_matrix(), right.as_matrix(), atol=1e-9)


class TestInverse:
    def test_identity(self):
        out = se3.inverse(Pose.identity())
        np.testing.assert_allclose(out.as_matrix(), np.eye(4), atol=1e-15)

    def test_pure_translation(self):
        out = se3.inverse(Pose(np.eye(3), [1.0, 2.0, 3.0]))
        np.testing.assert_allclose(out.translation, [-1.0, -2.0, -3.0], atol=1e-15)

    def test_minus_rt_oracle(self):
        # inverse(rotZ(pi/2), t=(1,0,0)) -> rotZ(-pi/2), t=(0,1,0)
        out = se3.inverse(Pose(se3.rot_z(math.pi / 2), [1.0, 0.0, 0.0]))
        np.testing.assert_allclose(out.rotation, se3.rot_z(-math.pi / 2), atol=1e-12)
        np.testing.assert_allclose(out.translation, [0.0, 1.0, 0.0], atol=1e-12)


class TestExpLog:
    def test_log_identity(self):
        np.testing.assert_allclose(se3.log(Pose.identity()), np.zeros(6), atol=1e-15)

    def test_log_rotz_axis_angle(self):
        vec = se3.log(Pose(se3.rot_z(math.pi / 2), np.zeros(3)))
        np.testing.assert_allclose(vec, [0, 0, 0, 0, 0, math.pi / 2], atol=1e-12)

    def test_round_trip_fixed_vector(self):
        v = np.array([1.0, 2.0, 3.0, 0.1, 0.2, 0.3])
        np.testing.assert_allclose(se3.log(se3.exp(v)), v, atol=1e-9)

    def test_round_trip_random(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            rotation = random_full_range_rotation(rng)
            pose = Pose(rotation, rng.normal(size=3) * 5.0)
            back = se3.exp(se3.log(pose))
            np.testing.assert_allclose(back.as_matrix(), pose.as_matrix(), atol=1e-9)

    def test_split_form_translation_is_raw(self):
        # The 6-vector pairs the raw translation with the axis-angle.
        pose = Pose(se3.rot_x(0.7), [4.0, -1.0, 2.5])
        np.testing.assert_allclose(se3.log(pose)[:3], pose.translation, atol=0)

    def test_near_pi_angle_round_trips(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            axis = rng.normal(size=3)
            axis /= np.linalg.norm(axis)
            angle = math.pi - 1e-3
            rotation = se3.so3_exp(axis * angle)
            back = se3.so3_exp(se3.so3_log(rotation))
            np.testing.assert_allclose(back, rotation, atol=1e-9)

    def test_at_pi_returns_a_principal_branch(self):
        rotation = se3.rot_x(math.pi)
        vec = se3.so3_log(rotation)
        assert abs(np.linalg.norm(vec) - math.pi) < 1e-9
        np.testing.assert_allclose(se3.so3_exp(vec), rotation, atol=1e-9)

    def test_twist_round_trip(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            twist = rng.normal(size=6)
            twist[3:] *= 0.6  # keep the rotation angle below pi
            pose = se3.exp_twist(twist)
            np.testing.assert_allclose(se3.log_twist(pose), twist, atol=1e-9)

    def test_twist_differs_from_split_under_rotation(self):
        twist = np.array([1.0, 0.0, 0.0, 0.0, 0.0, 1.0])
        assert not np.allclose(se3.exp_twist(twist).translation, se3.exp(twist).translation)


class TestGeodesicAngle:
    def test_zero_for_equal(self):
        rotation = se3.rot_y(0.9)
        assert se3.geodesic_angle(rotation, rotation) == pytest.approx(0.0, abs=1e-9)

    def test_quarter_turn(self):
        assert se3.geodesic_angle(np.eye(3), se3.rot_z(math.pi / 2)) == pytest.approx(math.pi / 2, abs=1e-12)

    def test_quaternion_dot_oracle(self):
        a, b = se3.rot_x(0.3), se3.rot_y(0.4)
        assert se3.geodesic_angle(a, b) == pytest.approx(quat_dot_angle(a, b), abs=1e-9)

    def test_symmetry_and_triangle_inequality(self):
        rng = np.random.default_rng(10)
        for _ in range(200):
            a = random_full_range_rotation(rng)
            b = random_full_range_rotation(rng)
            c = random_full_range_rotation(rng)
            ab = se3.geodesic_angle(a, b)
            assert ab == pytest.approx(se3.geodesic_angle(b, a), abs=1e-12)
            assert ab <= se3.geodesic_angle(a, c) + se3.geodesic_angle(c, b) + 1e-9


class TestRandomPose:
    def test_zero_scales_give_identity(self):
        pose = se3.random_pose(11, 0.0, 0.0)
        np.testing.assert_allclose(pose.as_matrix(), np.eye(4), atol=1e-15)

    def test_deterministic_per_seed(self):
        a = se3.random_pose(12, 1.0, 0.2)
        b = se3.random_pose(12, 1.0, 0.2)
        np.testing.assert_array_equal(a.as_matrix(), b.as_matrix())

    def test_rotation_vector_std_monte_carlo(self):
        rng = np.random.default_rng(13)
        rotvecs = np.stack([se3.so3_log(se3.random_pose(rng, 0.0, 0.1).rotation)
                            for _ in range(10_000)])
        std = rotvecs.std(axis=0)
        np.testing.assert_allclose(std, 0.1, rtol=0.05)

    def test_negative_scale_rejected(self):
        with pytest.raises(ValueError):
            se3.random_pose(1, -1.0, 0.0)


class TestNumericalHygiene:
    def test_long_composition_chain_stays_orthonormal(self):
        rng = np.random.default_rng(14)
        steps = [se3.random_pose(rng, 0.1, 0.01) for _ in range(1000)]
        pose = Pose.identity()
        for i in range(100_000):
            pose = se3.compose(pose, steps[i % 1000])
        assert se3.orthonormality_drift(pose.rotation) < 1e-6

    def test_invalid_rotation_rejected(self):
        with pytest.raises(ValueError):
            Pose(np.eye(3) * 1.1, np.zeros(3))
        with pytest.raises(ValueError):
            Pose(np.eye(3), [np.nan, 0.0, 0.0])
        reflection = np.diag([1.0, 1.0, -1.0])
        with pytest.raises(ValueError):
            Pose(reflection, np.zeros(3))

    def test_project_rotation_restores_orthonormality(self):
        rng = np.random.default_rng(15)
        noisy = se3.rot_x(0.3) + rng.normal(size=(3, 3)) * 1e-6
        fixed = se3.project_rotation(noisy)
        assert se3.orthonormality_drift(fixed) < 1e-12
        assert np.linalg.det(fixed) > 0
