"""Synthetic desk-scale camera world with exact ground-truth trajectories.

The scene is the interior of a tube around the +z axis, populated with
point landmarks whose albedo follows a seeded texture function (alternating
speckled and smooth zones along the tube, so some views are feature-rich and
others nearly uniform).  A camera-mounted light makes intensity fall off
with the inverse square of the landmark distance, so advancing or retreating
changes overall image brightness.

Cameras start at the world origin looking down +z, so generated trajectories
are born anchored (first pose = identity).  Rendering projects landmarks
through an ideal pinhole and splats each visible one as a small Gaussian
blob; a circular field-of-view mask is applied last.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import se3, trajectory as trj
from .se3 import Pose
from .trajectory import ActionSequence, Trajectory

MANIFEST_HEADER = "sequence,frame,image_path,mask_path"


@dataclass(frozen=True)
class TubeGeometry:
    """Cylinder around +z that landmarks sit on and the camera stays inside."""

    radius: float = 18.0       # mm, landmark surface
    z_min: float = -30.0       # mm
    z_max: float = 200.0       # mm
    keep_in_margin: float = 5.0  # camera must stay this far from the wall

    @property
    def keep_in_radius(self) -> float:
        return self.radius - self.keep_in_margin

    def contains_camera(self, position: np.ndarray) -> bool:
        lateral = math.hypot(position[0], position[1])
        return (lateral <= self.keep_in_radius
                and self.z_min + 8.0 <= position[2] <= self.z_max - 8.0)


DEFAULT_TUBE = TubeGeometry()


@dataclass(frozen=True)
class Scene:
    """Landmark cloud with per-point albedo and an inverse-square headlight."""

    points: np.ndarray          # (N, 3) mm
    albedo: np.ndarray          # (N,) in [0, 1]
    tube: TubeGeometry
    light_gain: float = 400.0   # mm^2; intensity = albedo * gain / distance^2

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        albedo = np.asarray(self.albedo, dtype=np.float64).reshape(-1)
        if np.any(albedo < 0.0) or np.any(albedo > 1.0):
            raise ValueError("albedo must lie in [0, 1]")
        points.setflags(write=False)
        albedo.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "albedo", albedo)


def make_tube_scene(seed: int, n_landmarks: int = 2500,
                    tube: TubeGeometry = DEFAULT_TUBE,
                    zone_period: float = 60.0,
                    light_gain: float = 400.0) -> Scene:
    """Seeded landmark scene on the tube interior.

    Texture alternates along z between speckled zones (albedo uniform in
    [0.3, 1.0], strong gradients) and smooth zones (albedo a gentle function
    of position in [0.12, 0.2], nearly featureless).
    """
    if n_landmarks < 500:
        raise ValueError("generated scenes need at least 500 landmarks")
    rng = np.random.default_rng(seed)
    phi = rng.uniform(0.0, 2.0 * math.pi, n_landmarks)
    z = rng.uniform(tube.z_min, tube.z_max, n_landmarks)
    points = np.stack([tube.radius * np.cos(phi), tube.radius * np.sin(phi), z], axis=1)

    zone_phase = rng.uniform(0.0, 2.0 * math.pi)
    speckled = np.sin(2.0 * math.pi * z / zone_period + zone_phase) >= 0.0
    speckle_albedo = rng.uniform(0.3, 1.0, n_landmarks)
    smooth_phase = rng.uniform(0.0, 2.0 * math.pi)
    smooth_albedo = 0.12 + 0.08 * (0.5 + 0.5 * np.sin(3.0 * phi + 0.05 * z + smooth_phase))
    albedo = np.where(speckled, speckle_albedo, smooth_albedo)
    return Scene(points, albedo, tube, light_gain)


@dataclass(frozen=True)
class Camera:
    """Ideal pinhole with a circular field-of-view mask."""

    focal: float                # pixels
    cx: float
    cy: float
    size: int                   # image is size x size
    mask_radius: float          # pixels

    def __post_init__(self):
        if self.focal <= 0.0:
            raise ValueError("focal length must be positive")
        if self.mask_radius > self.size / 2.0:
            raise ValueError("mask radius must be <= size/2")

    @staticmethod
    def default(size: int = 160) -> "Camera":
        center = (size - 1) / 2.0
        return Camera(focal=size * 0.5, cx=center, cy=center,
                      size=size, mask_radius=0.48 * size)

    def intrinsics(self) -> np.ndarray:
        return np.array([[self.focal, 0.0, self.cx],
                         [0.0, self.focal, self.cy],
                         [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class Observation:
    """Masked grayscale frame; pixels outside the mask are exactly zero."""

    image: np.ndarray   # (S, S) float64 in [0, 1]
    mask: np.ndarray    # (S, S) bool

    def __post_init__(self):
        image = np.asarray(self.image, dtype=np.float64)
        mask = np.asarray(self.mask, dtype=bool)
        if image.shape != mask.shape or image.ndim != 2:
            raise ValueError("image and mask must be equal square 2D arrays")
        if image.min() < 0.0 or image.max() > 1.0:
            raise ValueError("image values must lie in [0, 1]")
        if np.any(image[~mask] != 0.0):
            raise ValueError("pixels outside the mask must be exactly 0")
        image.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "image", image)
        object.__setattr__(self, "mask", mask)


def circular_mask(size: int, radius: float) -> np.ndarray:
    center = (size - 1) / 2.0
    yy, xx = np.mgrid[0:size, 0:size]
    return (xx - center) ** 2 + (yy - center) ** 2 <= radius ** 2


def project(camera: Camera, pose: Pose, points: np.ndarray,
            near: float = 1.0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pinhole projection of world points through a camera-to-world pose.

    Returns (uv pixel coords (N, 2), camera-frame depth z (N,), in_front
    bool mask).  uv rows for points behind the near plane are unusable.
    """
    local = (points - pose.translation) @ pose.rotation
    z = local[:, 2]
    in_front = z > near
    with np.errstate(divide="ignore", invalid="ignore"):
        u = camera.focal * local[:, 0] / z + camera.cx
        v = camera.focal * local[:, 1] / z + camera.cy
    return np.stack([u, v], axis=1), z, in_front


def _inside_mask(camera: Camera, uv: np.ndarray) -> np.ndarray:
    return ((uv[:, 0] - camera.cx) ** 2 + (uv[:, 1] - camera.cy) ** 2
            <= camera.mask_radius ** 2)


def render(scene: Scene, camera: Camera, pose: Pose,
           blob_sigma: float = 1.0) -> Observation:
    """Splat visible landmarks as Gaussian blobs lit by the headlight."""
    uv, z, in_front = project(camera, pose, scene.points)
    distance2 = np.sum((scene.points - pose.translation) ** 2, axis=1)
    visible = in_front & _inside_mask(camera, uv)

    image = np.zeros((camera.size, camera.size))
    if np.any(visible):
        centers = uv[visible]
        amps = scene.albedo[visible] * scene.light_gain / distance2[visible]
        base = np.round(centers).astype(np.int64)
        frac = centers - base
        reach = int(math.ceil(3.0 * blob_sigma))
        inv_two_sigma2 = 1.0 / (2.0 * blob_sigma * blob_sigma)
        for dy in range(-reach, reach + 1):
            for dx in range(-reach, reach + 1):
                px = base[:, 0] + dx
                py = base[:, 1] + dy
                ok = (px >= 0) & (px < camera.size) & (py >= 0) & (py < camera.size)
                if not np.any(ok):
                    continue
                w = np.exp(-((dx - frac[:, 0]) ** 2 + (dy - frac[:, 1]) ** 2)
                           * inv_two_sigma2)
                np.add.at(image, (py[ok], px[ok]), amps[ok] * w[ok])
        np.clip(image, 0.0, 1.0, out=image)

    mask = circular_mask(camera.size, camera.mask_radius)
    image[~mask] = 0.0
    return Observation(image, mask)


def landmark_projections(scene: Scene, camera: Camera, pose: Pose,
                         min_albedo: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Indices and pixel positions of detectable landmarks in this view.

    A landmark is detectable when it is in front of the camera, inside the
    circular field of view, and has albedo >= min_albedo (dim points do not
    count as trackable features).
    """
    uv, _, in_front = project(camera, pose, scene.points)
    ok = in_front & _inside_mask(camera, uv) & (scene.albedo >= min_albedo)
    return np.nonzero(ok)[0], uv[ok]


def correspondences(scene: Scene, camera: Camera, pose_a: Pose, pose_b: Pose,
                    min_albedo: float = 0.0, noise_px: float = 0.0,
                    rng: np.random.Generator | None = None
                    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Landmark ids and matched pixel coordinates detectable in both views."""
    ids_a, uv_a = landmark_projections(scene, camera, pose_a, min_albedo)
    ids_b, uv_b = landmark_projections(scene, camera, pose_b, min_albedo)
    common, ia, ib = np.intersect1d(ids_a, ids_b, return_indices=True)
    pts_a, pts_b = uv_a[ia], uv_b[ib]
    if noise_px > 0.0:
        if rng is None:
            raise ValueError("noise_px > 0 requires an rng")
        pts_a = pts_a + rng.normal(0.0, noise_px, pts_a.shape)
        pts_b = pts_b + rng.normal(0.0, noise_px, pts_b.shape)
    return common, pts_a, pts_b


# ---------------------------------------------------------------------------
# Camera motion

PROFILE_KINDS = ("smooth-advance", "orbit", "jitter")


@dataclass(frozen=True)
class MotionProfile:
    """Per-step motion statistics for trajectory generation.

    trans_std / rot_std are per-step standard deviations (mm / rad).
    forward_speed adds a deterministic drift along the camera's +z.
    smoothing is the AR(1) coefficient of the low-pass filtered velocity
    used by smooth-advance.
    """

    kind: str = "smooth-advance"
    trans_std: float = 0.4
    rot_std: float = 0.01
    forward_speed: float = 0.0
    smoothing: float = 0.8

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ValueError(f"unknown motion profile {self.kind!r}")
        if self.trans_std < 0.0 or self.rot_std < 0.0:
            raise ValueError("motion stds must be non-negative")
        if not 0.0 <= self.smoothing < 1.0:
            raise ValueError("smoothing must lie in [0, 1)")


def generate_trajectory(seed: int, n_frames: int, profile: MotionProfile,
                        tube: TubeGeometry = DEFAULT_TUBE,
                        max_resamples: int = 1000) -> Trajectory:
    """Seeded random camera path starting at the identity pose.

    Steps that would leave the tube's keep-in region are resampled (up to
    max_resamples, then an error is raised).
    """
    if n_frames < 2:
        raise ValueError("n_frames must be >= 2")
    rng = np.random.default_rng(seed)
    position = np.zeros(3)
    rotation = np.eye(3)
    poses = [Pose(rotation, position)]

    alpha = profile.smoothing
    beta = math.sqrt(1.0 - alpha * alpha)
    velocity = rng.normal(0.0, profile.trans_std, 3)      # stationary AR(1) init
    omega = rng.normal(0.0, profile.rot_std, 3)
    orbit_radius = 0.45 * tube.keep_in_radius
    orbit_center = np.array([-orbit_radius, 0.0, 0.0])
    orbit_angle = 0.0

    for step in range(1, n_frames):
        for attempt in range(max_resamples + 1):
            if profile.kind == "smooth-advance":
                cand_velocity = alpha * velocity + beta * rng.normal(0.0, profile.trans_std, 3)
                move = cand_velocity + profile.forward_speed * rotation[:, 2]
                cand_position = position + move
                cand_omega = alpha * omega + beta * rng.normal(0.0, profile.rot_std, 3)
                cand_rotation = rotation @ se3.so3_exp(cand_omega)
            elif profile.kind == "orbit":
                arc = (profile.trans_std + abs(rng.normal(0.0, 0.3 * profile.trans_std))) / max(orbit_radius, 1e-9)
                cand_angle = orbit_angle + arc
                cand_position = orbit_center + orbit_radius * np.array(
                    [math.cos(cand_angle), math.sin(cand_angle), 0.0])
                cand_position[2] = position[2] + profile.forward_speed
                cand_rotation = rotation @ se3.so3_exp(
                    np.array([0.0, 0.0, arc]) + rng.normal(0.0, profile.rot_std, 3))
                cand_velocity, cand_omega = velocity, omega
            else:  # jitter
                cand_position = position + rng.normal(0.0, profile.trans_std, 3) \
                    + profile.forward_speed * rotation[:, 2]
                cand_rotation = rotation @ se3.so3_exp(rng.normal(0.0, profile.rot_std, 3))
                cand_velocity, cand_omega = velocity, omega

            if tube.contains_camera(cand_position):
                break
            if attempt == max_resamples:
                raise RuntimeError(
                    f"motion profile left the tube at step {step} after "
                    f"{max_resamples} resamples")
        position, rotation = cand_position, cand_rotation
        velocity, omega = cand_velocity, cand_omega
        if profile.kind == "orbit":
            orbit_angle = cand_angle
        if se3.orthonormality_drift(rotation) > se3.RENORM_TRIGGER:
            rotation = se3.project_rotation(rotation)
        poses.append(Pose(rotation, position))

    return Trajectory.from_poses(poses, anchored=True)


# ---------------------------------------------------------------------------
# Dataset construction

@dataclass(frozen=True)
class WindowSample:
    """One training/eval window: endpoint observations, state, and actions."""

    sequence: str
    t: int
    obs_t: Observation
    obs_tk: Observation
    state: np.ndarray          # log of the anchored pose at frame t
    actions: ActionSequence

    def __post_init__(self):
        state = np.asarray(self.state, dtype=np.float64).reshape(6)
        state.setflags(write=False)
        object.__setattr__(self, "state", state)


def render_sequence(scene: Scene, camera: Camera, traj: Trajectory,
                    blob_sigma: float = 1.0) -> dict[int, Observation]:
    return {i: render(scene, camera, p, blob_sigma) for i, p in traj.frames}


def window_samples(sequence: str, traj: Trajectory,
                   observations: dict[int, Observation], k: int) -> list[WindowSample]:
    """All length-k windows of one anchored sequence, ordered by start frame."""
    if not traj.anchored:
        raise ValueError("trajectory must be anchored")
    samples = []
    indices = traj.indices
    for t in indices:
        if t + k not in observations or any(i not in observations for i in range(t, t + k)):
            continue
        try:
            actions = trj.extract_actions(traj, t, k)
        except ValueError:
            continue
        samples.append(WindowSample(
            sequence=sequence,
            t=t,
            obs_t=observations[t],
            obs_tk=observations[t + k],
            state=se3.log(traj.pose_at(t)),
            actions=actions,
        ))
    return samples


def build_dataset(scene: Scene, camera: Camera, trajectories, k: int,
                  blob_sigma: float = 1.0) -> tuple[list[WindowSample], int]:
    """Render every trajectory and emit one sample per valid window.

    Trajectories shorter than k+1 frames are skipped; the second return
    value counts them.
    """
    samples: list[WindowSample] = []
    skipped = 0
    for seq_index, traj in enumerate(trajectories):
        if len(traj) < k + 1:
            skipped += 1
            continue
        observations = render_sequence(scene, camera, traj, blob_sigma)
        samples.extend(window_samples(f"seq_{seq_index:03d}", traj, observations, k))
    return samples, skipped


# ---------------------------------------------------------------------------
# Disk format: 8-bit PGM images + masks, CSV manifest, trajectory CSV

def write_pgm(path, image01: np.ndarray) -> None:
    """8-bit binary portable graymap of an image with values in [0, 1]."""
    data = np.round(np.asarray(image01) * 255.0).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(data.tobytes())


def read_pgm(path) -> np.ndarray:
    """Read an 8-bit binary PGM back to float64 in [0, 1]."""
    raw = Path(path).read_bytes()
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            while pos < len(raw) and raw[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        fields.append(raw[start:pos])
    if fields[0] != b"P5" or fields[3] != b"255":
        raise ValueError(f"unsupported PGM header in {path}")
    w, h = int(fields[1]), int(fields[2])
    pos += 1  # single whitespace after maxval
    data = np.frombuffer(raw[pos:pos + w * h], dtype=np.uint8).reshape(h, w)
    return data.astype(np.float64) / 255.0


def write_observation(image_path, mask_path, obs: Observation) -> None:
    write_pgm(image_path, obs.image)
    write_pgm(mask_path, obs.mask.astype(np.float64))


def read_observation(image_path, mask_path) -> Observation:
    image = read_pgm(image_path)
    mask = read_pgm(mask_path) > 0.5
    image = image * mask  # defensive: enforce the outside-mask-zero invariant
    return Observation(image, mask)


@dataclass
class SequenceData:
    name: str
    trajectory: Trajectory
    observations: dict[int, Observation]


def write_dataset(root, sequences: list[SequenceData]) -> None:
    """Write manifest, per-sequence trajectory files, and PGM frames."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    lines = [MANIFEST_HEADER]
    for seq in sequences:
        seq_dir = root / seq.name
        seq_dir.mkdir(exist_ok=True)
        trj.write_trajectory_file(seq_dir / "traj.csv", seq.trajectory)
        for frame, obs in sorted(seq.observations.items()):
            image_rel = f"{seq.name}/frame_{frame:06d}.pgm"
            mask_rel = f"{seq.name}/frame_{frame:06d}.mask.pgm"
            write_observation(root / image_rel, root / mask_rel, obs)
            lines.append(f"{seq.name},{frame},{image_rel},{mask_rel}")
    (root / "manifest.csv").write_text("\n".join(lines) + "\n")


def load_dataset(root) -> list[SequenceData]:
    """Load a dataset written by :func:`write_dataset`."""
    root = Path(root)
    manifest = (root / "manifest.csv").read_text().strip().splitlines()
    if not manifest or manifest[0] != MANIFEST_HEADER:
        raise ValueError(f"bad manifest header in {root}")
    frames_by_seq: dict[str, list[tuple[int, str, str]]] = {}
    order: list[str] = []
    for line in manifest[1:]:
        name, frame, image_rel, mask_rel = line.split(",")
        if name not in frames_by_seq:
            frames_by_seq[name] = []
            order.append(name)
        frames_by_seq[name].append((int(frame), image_rel, mask_rel))
    sequences = []
    for name in order:
        rows = trj.read_trajectory_file(root / name / "traj.csv")
        traj = trj.rows_to_trajectory(rows, anchored=True)
        observations = {
            frame: read_observation(root / image_rel, root / mask_rel)
            for frame, image_rel, mask_rel in frames_by_seq[name]
        }
        sequences.append(SequenceData(name, traj, observations))
    return sequences
