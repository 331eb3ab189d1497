import math

import numpy as np
import pytest

from policyvo import se3, trajectory
from policyvo.se3 import Pose
from policyvo.trajectory import ActionSequence, Trajectory


def random_trajectory(seed, n, trans_scale=2.0, rot_scale=0.3, start_index=0):
    rng = np.random.default_rng(seed)
    pose = se3.random_pose(rng, 10.0, 1.0)
    poses = [pose]
    for _ in range(n - 1):
        pose = se3.compose(pose, se3.random_pose(rng, trans_scale, rot_scale))
        poses.append(pose)
    return Trajectory.from_poses(poses, start_index=start_index)


class TestTrajectoryType:
    def test_indices_strictly_increasing(self):
        p = Pose.identity()
        with pytest.raises(ValueError):
            Trajectory(((0, p), (0, p)))
        with pytest.raises(ValueError):
            Trajectory(((2, p), (1, p)))

    def test_anchored_flag_requires_identity_start(self):
        with pytest.raises(ValueError):
            Trajectory(((0, Pose(np.eye(3), [1.0, 0, 0])),), anchored=True)


class TestAnchor:
    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            trajectory.anchor(Trajectory(()))

    def test_single_frame_becomes_identity(self):
        traj = Trajectory(((5, se3.random_pose(0, 3.0, 0.5)),))
        out = trajectory.anchor(traj)
        np.testing.assert_allclose(out.frames[0][1].as_matrix(), np.eye(4), atol=1e-12)

    def test_idempotent(self):
        traj = trajectory.anchor(random_trajectory(1, 5))
        again = trajectory.anchor(traj)
        for (_, a), (_, b) in zip(traj.frames, again.frames):
            np.testing.assert_allclose(a.as_matrix(), b.as_matrix(), atol=1e-9)

    def test_relative_transforms_invariant(self):
        traj = random_trajectory(2, 3)
        anchored = trajectory.anchor(traj)
        before = se3.relative(traj.poses[1], traj.poses[2])
        after = se3.relative(anchored.poses[1], anchored.poses[2])
        np.testing.assert_allclose(before.as_matrix(), after.as_matrix(), atol=1e-9)

    def test_all_pairs_invariant(self):
        traj = random_trajectory(3, 6)
        anchored = trajectory.anchor(traj)
        for i in range(6):
            for j in range(6):
                before = se3.relative(traj.poses[i], traj.poses[j])
                after = se3.relative(anchored.poses[i], anchored.poses[j])
                np.testing.assert_allclose(before.as_matrix(), after.as_matrix(), atol=1e-9)


class TestExtractActions:
    def test_static_trajectory_gives_zero_deltas(self):
        pose = se3.random_pose(4, 2.0, 0.3)
        traj = Trajectory.from_poses([pose] * 5)
        actions = trajectory.extract_actions(traj, 0, 4)
        np.testing.assert_allclose(actions.as_array(), np.zeros((4, 6)), atol=1e-12)

    def test_constant_step_translation(self):
        poses = [Pose(np.eye(3), [float(i), 0.0, 0.0]) for i in range(6)]
        traj = Trajectory.from_poses(poses)
        actions = trajectory.extract_actions(traj, 1, 3)
        expected = np.tile([1.0, 0, 0, 0, 0, 0], (3, 1))
        np.testing.assert_allclose(actions.as_array(), expected, atol=1e-12)

    def test_missing_frames_error(self):
        traj = random_trajectory(5, 4)
        with pytest.raises(ValueError, match="window out of range"):
            trajectory.extract_actions(traj, 2, 4)

    def test_round_trip_reconstructs_end_pose(self):
        traj = random_trajectory(6, 12)
        actions = trajectory.extract_actions(traj, 3, 8)
        end = trajectory.compose_window(traj.pose_at(3), actions, 8)
        np.testing.assert_allclose(end.as_matrix(), traj.pose_at(11).as_matrix(), atol=1e-9)


class TestComposeWindow:
    def test_zero_actions_returns_start(self):
        start = se3.random_pose(7, 2.0, 0.4)
        actions = ActionSequence.from_array(np.zeros((4, 6)))
        out = trajectory.compose_window(start, actions, 4)
        np.testing.assert_allclose(out.as_matrix(), start.as_matrix(), atol=1e-12)

    def test_single_step_definition(self):
        start = se3.random_pose(8, 2.0, 0.4)
        actions = trajectory.extract_actions(random_trajectory(9, 4), 0, 3)
        out = trajectory.compose_window(start, actions, 1)
        expected = se3.compose(start, actions.deltas[0].as_pose())
        np.testing.assert_allclose(out.as_matrix(), expected.as_matrix(), atol=1e-12)

    def test_w_longer_than_sequence_rejected(self):
        actions = ActionSequence.from_array(np.zeros((2, 6)))
        with pytest.raises(ValueError):
            trajectory.compose_window(Pose.identity(), actions, 3)

    def test_thousand_random_windows_round_trip(self):
        rng = np.random.default_rng(10)
        for case in range(100):
            traj = random_trajectory(1000 + case, 10)
            actions = trajectory.extract_actions(traj, 0, 8)
            for w in (1, 4, 8):
                end = trajectory.compose_window(traj.pose_at(0), actions, w)
                np.testing.assert_allclose(end.as_matrix(), traj.pose_at(w).as_matrix(),
                                           atol=1e-9)


class TestNormStats:
    def test_identical_vectors_floor_std(self):
        state = np.arange(6.0)
        actions = ActionSequence.from_array(np.ones((4, 6)))
        stats = trajectory.fit_norm_stats([(state, actions)] * 3)
        np.testing.assert_allclose(stats.state_std, 1e-6)
        np.testing.assert_allclose(stats.action_std, 1e-6)

    def test_population_convention(self):
        actions = ActionSequence.from_array(np.zeros((1, 6)))
        a = (np.full(6, -1.0), actions)
        b = (np.full(6, 1.0), actions)
        stats = trajectory.fit_norm_stats([a, b])
        np.testing.assert_allclose(stats.state_mean, 0.0, atol=1e-15)
        np.testing.assert_allclose(stats.state_std, 1.0, atol=1e-15)

    def test_two_pass_oracle(self):
        rng = np.random.default_rng(11)
        dataset = []
        for _ in range(50):
            state = rng.normal(size=6) * 3.0 + 1.0
            actions = ActionSequence.from_array(rng.normal(size=(8, 6)) * 0.4)
            dataset.append((state, actions))
        stats = trajectory.fit_norm_stats(dataset)

        # Independent two-pass mean/std computation.
        states = np.stack([s for s, _ in dataset])
        mean = states.sum(axis=0) / len(states)
        var = ((states - mean) ** 2).sum(axis=0) / len(states)
        np.testing.assert_allclose(stats.state_mean, mean, atol=1e-12)
        np.testing.assert_allclose(stats.state_std, np.sqrt(var), atol=1e-12)

        pooled = np.concatenate([a.as_array() for _, a in dataset])
        mean_a = pooled.sum(axis=0) / len(pooled)
        var_a = ((pooled - mean_a) ** 2).sum(axis=0) / len(pooled)
        np.testing.assert_allclose(stats.action_mean, mean_a, atol=1e-12)
        np.testing.assert_allclose(stats.action_std, np.sqrt(var_a), atol=1e-12)

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            trajectory.fit_norm_stats([])

    def test_translation_covariance(self):
        rng = np.random.default_rng(12)
        dataset = [(rng.normal(size=6), ActionSequence.from_array(rng.normal(size=(4, 6)) * 0.4))
                   for _ in range(20)]
        shift = np.array([5.0, -2.0, 1.0])
        shifted = []
        for state, actions in dataset:
            s = state.copy()
            s[:3] += shift
            shifted.append((s, actions))
        base = trajectory.fit_norm_stats(dataset)
        moved = trajectory.fit_norm_stats(shifted)
        np.testing.assert_allclose(moved.state_mean[:3] - base.state_mean[:3], shift, atol=1e-12)
        np.testing.assert_allclose(moved.state_std, base.state_std, atol=1e-12)


class TestNormalize:
    def test_mean_maps_to_zero(self):
        mean = np.arange(6.0)
        std = np.ones(6) * 2.0
        np.testing.assert_allclose(trajectory.normalize(mean, mean, std), np.zeros(6), atol=0)

    def test_round_trip(self):
        rng = np.random.default_rng(13)
        mean, std = rng.normal(size=6), rng.uniform(0.5, 2.0, 6)
        v = rng.normal(size=6) * 4.0
        back = trajectory.denormalize(trajectory.normalize(v, mean, std), mean, std)
        np.testing.assert_allclose(back, v, atol=1e-12)

    def test_explicit_values(self):
        out = trajectory.normalize(np.full(6, 3.0), np.full(6, 1.0), np.full(6, 2.0))
        np.testing.assert_allclose(out, np.ones(6), atol=0)


class TestTrajectoryFile:
    def test_round_trip(self, tmp_path):
        traj = random_trajectory(14, 7, start_index=3)
        path = tmp_path / "traj.csv"
        trajectory.write_trajectory_file(path, traj)
        rows = trajectory.read_trajectory_file(path)
        assert [i for i, _ in rows] == traj.indices
        for (_, read_pose), pose in zip(rows, traj.poses):
            np.testing.assert_allclose(read_pose.as_matrix(), pose.as_matrix(), atol=1e-12)

    def test_invalid_rows_round_trip(self, tmp_path):
        rows = [(0, Pose.identity()), (1, None), (2, se3.random_pose(15, 1.0, 0.2))]
        path = tmp_path / "traj.csv"
        trajectory.write_trajectory_file(path, rows)
        back = trajectory.read_trajectory_file(path)
        assert back[1][1] is None
        assert back[0][1] is not None
        traj = trajectory.rows_to_trajectory(back)
        assert traj.indices == [0, 2]

    def test_header_enforced(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n")
        with pytest.raises(ValueError, match="header"):
            trajectory.read_trajectory_file(path)

    def test_precision_at_least_15_digits(self, tmp_path):
        value = 1.0 / 3.0
        traj = Trajectory(((0, Pose(np.eye(3), [value, 0, 0])),))
        path = tmp_path / "traj.csv"
        trajectory.write_trajectory_file(path, traj)
        rows = trajectory.read_trajectory_file(path)
        assert rows[0][1].translation[0] == value
