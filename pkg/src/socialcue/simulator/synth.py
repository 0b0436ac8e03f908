"""Synthetic observations: projected landmarks, face textures and jittered frames."""
from dataclasses import dataclass
import math
import zlib

import cv2
import numpy as np
from scipy import ndimage

from ..camera import project
from ..faceid import CHIP_EYES, CHIP_SIZE
from ..headpose import LandmarkObservation, default_face_model, pose_points
from ..stabilizer import Frame

FACE_PATCH = CHIP_SIZE
TEXTURE_MARGIN = 32


@dataclass(frozen=True)
class ParticipantState:
    track_id: int
    name: str  # None when unknown
    bearing: float
    distance: float
    yaw: float
    pitch: float


def nose_position(bearing, distance):
    b = math.radians(bearing)
    return np.array([distance * math.sin(b), 0.0, distance * math.cos(b)])


def face_points_camera(state, model=None):
    model = model or default_face_model()
    return pose_points(model, state.yaw, state.pitch, 0.0, nose_position(state.bearing, state.distance))


def in_view(points3d, camera):
    """True when every landmark lies inside the horizontal field and the image."""
    theta = np.arctan2(np.hypot(points3d[:, 0], points3d[:, 1]), points3d[:, 2])
    if np.any(theta > camera.half_fov):
        return False
    px = project(points3d, camera)
    return bool(
        np.all(px[:, 0] >= 0) and np.all(px[:, 0] <= camera.width)
        and np.all(px[:, 1] >= 0) and np.all(px[:, 1] <= camera.height)
    )


def scene_state(scenario, t, model=None) -> list:
    """Ground-truth state of every participant visible at time ``t``."""
    out = []
    for i, p in enumerate(scenario.participants):
        if not p.enter <= t < p.exit:
            continue
        bearing, distance, yaw, pitch = p.state(t)
        st = ParticipantState(i + 1, p.name, bearing, distance, yaw, pitch)
        if in_view(face_points_camera(st, model), scenario.camera):
            out.append(st)
    return out


def observation_rng(seed, t):
    return np.random.default_rng([seed & 0xFFFFFFFF, t])


def synthesize_observations(scenario, t, seed=0, model=None, offset=(0.0, 0.0), states=None) -> list:
    """Landmark observations at ``t`` with the scenario's Gaussian landmark noise.

    ``offset`` shifts every point in the image plane (camera shake).
    """
    model = model or default_face_model()
    states = scene_state(scenario, t, model) if states is None else states
    rng = observation_rng(seed, t)
    obs = []
    for st in states:
        pts = project(face_points_camera(st, model), scenario.camera)
        if scenario.noise > 0:
            pts = pts + rng.normal(0.0, scenario.noise, pts.shape)
        pts = pts + np.asarray(offset, dtype=float)
        obs.append(LandmarkObservation.from_points(st.track_id, pts, t))
    return obs


# ---------------------------------------------------------------------------
# face textures


def identity_seed(name, track_id=0):
    """Stable texture seed; unknown people get per-track seeds disjoint from names."""
    if name is None:
        return 0x5EED0000 + track_id
    return zlib.crc32(name.encode())


_TEXTURES = {}


def identity_texture(seed) -> np.ndarray:
    """Band-limited noise in canonical chip coordinates, with a margin on every side."""
    tex = _TEXTURES.get(seed)
    if tex is None:
        rng = np.random.default_rng(seed)
        size = CHIP_SIZE + 2 * TEXTURE_MARGIN
        tex = ndimage.gaussian_filter(rng.normal(0.0, 1.0, (size, size)), 2.0, mode="wrap")
        tex = (tex - tex.mean()) / tex.std() * 40.0 + 128.0
        _TEXTURES[seed] = tex
    return tex


def canonical_chip_landmarks(model=None):
    """Frontal model landmarks placed so the outer eye corners land on the chip's canonical eye positions."""
    pts = (model or default_face_model()).points
    eyes = pts[[36, 45]]
    scale = (CHIP_EYES[1, 0] - CHIP_EYES[0, 0]) / (eyes[1, 0] - eyes[0, 0])
    mid = eyes.mean(axis=0)
    cx, cy = CHIP_EYES.mean(axis=0)
    return np.stack([cx + scale * (pts[:, 0] - mid[0]), cy - scale * (pts[:, 1] - mid[1])], axis=1)


def render_face(seed, pose_seed, model=None):
    """A face patch of one identity under a small random in-plane pose and lighting change.

    Returns (uint8 image of FACE_PATCH px square, landmarks in patch px).
    Deterministic in ``(seed, pose_seed)``.
    """
    tex = identity_texture(seed)
    rng = np.random.default_rng([pose_seed & 0xFFFFFFFF, 7])
    angle = math.radians(rng.uniform(-10.0, 10.0))
    scale = rng.uniform(0.92, 1.08)
    shift = rng.uniform(-4.0, 4.0, 2)
    light = rng.uniform(-20.0, 20.0)
    c = np.array([FACE_PATCH / 2, FACE_PATCH / 2]) + shift
    M = scale * np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
    Minv = np.linalg.inv(M)
    ys, xs = np.mgrid[0:FACE_PATCH, 0:FACE_PATCH].astype(float)
    u = Minv[0, 0] * (xs - c[0]) + Minv[0, 1] * (ys - c[1]) + CHIP_SIZE / 2 + TEXTURE_MARGIN
    v = Minv[1, 0] * (xs - c[0]) + Minv[1, 1] * (ys - c[1]) + CHIP_SIZE / 2 + TEXTURE_MARGIN
    img = ndimage.map_coordinates(tex, [v, u], order=1, mode="nearest") + light
    landmarks = (canonical_chip_landmarks(model) - CHIP_SIZE / 2) @ M.T + c
    return np.clip(np.rint(img), 0, 255).astype(np.uint8), landmarks


def add_pixel_noise(image, sigma, rng):
    noisy = np.asarray(image, dtype=float) + rng.normal(0.0, sigma, np.shape(image))
    return np.clip(np.rint(noisy), 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# background frames for the stabilizer


def scene_texture(width, height, margin=48, seed=0):
    rng = np.random.default_rng(seed)
    tex = ndimage.gaussian_filter(rng.normal(0.0, 1.0, (height + 2 * margin, width + 2 * margin)), 2.0)
    return (tex - tex.mean()) / tex.std() * 40.0 + 128.0, margin


def render_view(texture, margin, width, height, dx=0.0, dy=0.0, angle=0.0):
    """View of a static textured scene with the camera content moved by (dx, dy) px
    and rotated by ``angle`` degrees about the frame centre."""
    a = math.radians(angle)
    c, s = math.cos(a), math.sin(a)
    cx, cy = width / 2, height / 2
    # output pixel -> texture coordinate
    m = np.array([
        [c, s, -c * (cx + dx) - s * (cy + dy) + cx + margin],
        [-s, c, s * (cx + dx) - c * (cy + dy) + cy + margin],
    ], dtype=np.float64)
    out = cv2.warpAffine(
        texture.astype(np.float32), m, (width, height),
        flags=cv2.INTER_CUBIC | cv2.WARP_INVERSE_MAP, borderMode=cv2.BORDER_REPLICATE,
    )
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def jittered_sequence(n_frames, amplitude, period, width=640, height=480, seed=0, fps=30.0):
    """Frames of a static scene shaken sinusoidally; returns (frames, injected offsets)."""
    tex, margin = scene_texture(width, height, seed=seed)
    frames, offsets = [], []
    for k in range(n_frames):
        phase = 2 * math.pi * k / period
        dx, dy = amplitude * math.sin(phase), amplitude * math.cos(phase)
        frames.append(Frame(render_view(tex, margin, width, height, dx, dy), int(round(k * 1000 / fps))))
        offsets.append((dx, dy))
    return frames, np.array(offsets)
