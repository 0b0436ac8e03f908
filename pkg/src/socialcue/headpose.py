"""Head orientation from 68 facial landmarks seen through the fisheye camera.

Rotation convention
-------------------
A face with zero yaw, pitch and roll looks straight down the optical axis
into the camera. Its model frame (x right, y up, z out of the face) maps to
the camera frame (x right, y down, z forward) through ``FLIP = diag(1, -1, -1)``.
The full model-to-camera rotation is::

    R = Ry(yaw) @ Rx(pitch) @ Rz(roll) @ FLIP

i.e. yaw about the camera vertical first, then pitch, then roll, each about the
already-rotated axes. Under this convention a face at bearing ``beta`` points
at the camera exactly when ``yaw == beta``.
"""
from dataclasses import dataclass, field
import enum
from importlib import resources
import math
from pathlib import Path

import numpy as np

from .camera import CameraIntrinsics, project, undistort_points
from .errors import DegenerateConfiguration, NoConvergence, ValidationError

N_LANDMARKS = 68
NOSE_TIP = 30
OUTER_EYE_CORNERS = (36, 45)
# jawline points are silhouette points; their 3D match moves with pose
INTERIOR = np.arange(17, 68)

FLIP = np.diag([1.0, -1.0, -1.0])


@dataclass(frozen=True)
class LandmarkObservation:
    track_id: int
    points: np.ndarray  # (68, 2) px
    bbox: tuple  # (x0, y0, x1, y1) px
    timestamp: int  # ms

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.shape != (N_LANDMARKS, 2):
            raise ValidationError(f"expected (68, 2) landmark array, got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("landmarks must be finite")
        x0, y0, x1, y1 = self.bbox
        inside = (pts[:, 0] >= x0) & (pts[:, 0] <= x1) & (pts[:, 1] >= y0) & (pts[:, 1] <= y1)
        if inside.sum() < 60:
            raise ValidationError(f"bbox holds only {int(inside.sum())} of 68 landmarks")
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_points(cls, track_id, points, timestamp, margin=2.0):
        pts = np.asarray(points, dtype=float)
        lo = pts.min(axis=0) - margin
        hi = pts.max(axis=0) + margin
        return cls(track_id, pts, (lo[0], lo[1], hi[0], hi[1]), timestamp)


@dataclass(frozen=True)
class FaceModel3D:
    points: np.ndarray  # (68, 3) mm

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.shape != (N_LANDMARKS, 3):
            raise ValidationError(f"face model needs 68 points, got {pts.shape}")
        object.__setattr__(self, "points", pts)


def load_face_model(path=None) -> FaceModel3D:
    """Read a face model file of ``index x y z`` lines; '#' starts a comment."""
    if path is None:
        text = resources.files("socialcue").joinpath("data/face_model_68.txt").read_text()
    else:
        text = Path(path).read_text()
    pts = np.full((N_LANDMARKS, 3), np.nan)
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        idx, x, y, z = line.split()
        pts[int(idx)] = float(x), float(y), float(z)
    if np.isnan(pts).any():
        raise ValidationError("face model file does not define all 68 landmarks")
    return FaceModel3D(pts)


_DEFAULT_MODEL = None


def default_face_model() -> FaceModel3D:
    global _DEFAULT_MODEL
    if _DEFAULT_MODEL is None:
        _DEFAULT_MODEL = load_face_model()
    return _DEFAULT_MODEL


def rot_x(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])


def rot_y(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])


def rot_z(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


def rotation_from_euler(yaw, pitch=0.0, roll=0.0) -> np.ndarray:
    """Model-to-camera rotation for angles in degrees."""
    return (
        rot_y(math.radians(yaw)) @ rot_x(math.radians(pitch)) @ rot_z(math.radians(roll)) @ FLIP
    )


def euler_from_rotation(R):
    """Inverse of :func:`rotation_from_euler`; returns (yaw, pitch, roll) in degrees."""
    M = R @ FLIP
    yaw = math.atan2(M[0, 2], M[2, 2])
    pitch = math.atan2(-M[1, 2], math.hypot(M[1, 0], M[1, 1]))
    roll = math.atan2(M[1, 0], M[1, 1])
    return math.degrees(yaw), math.degrees(pitch), math.degrees(roll)


@dataclass(frozen=True)
class HeadPose:
    yaw: float
    pitch: float
    roll: float
    translation: np.ndarray  # nose tip in camera frame, mm
    rms_reprojection: float = 0.0
    rotation: np.ndarray = field(default=None, repr=False, compare=False)


class YawBin(enum.Enum):
    FAR_LEFT = "FarLeft"
    LEFT = "Left"
    AT_WEARER = "AtWearer"
    RIGHT = "Right"
    FAR_RIGHT = "FarRight"


def wrap_degrees(a):
    return (a + 180.0) % 360.0 - 180.0


def bearing_of(obs: LandmarkObservation, intr: CameraIntrinsics) -> float:
    """Horizontal angle (deg) of the nose-tip ray, positive to the wearer's right."""
    ray = undistort_points(obs.points[NOSE_TIP], intr)
    return math.degrees(math.atan2(ray[0], ray[2]))


def relative_yaw(yaw, bearing):
    """Zero when the face points at the wearer."""
    return wrap_degrees(yaw - bearing)


def classify_yaw(pose: HeadPose, bearing: float, inner=22.5, outer=67.5) -> YawBin:
    """Five-way bin of the relative yaw; boundary values fall to the inner bin.

    Positive relative yaw means the face is turned towards the wearer's right.
    """
    return yaw_bin_of_delta(relative_yaw(pose.yaw, bearing), inner, outer)


def yaw_bin_of_delta(delta, inner=22.5, outer=67.5) -> YawBin:
    mag = abs(delta)
    if mag <= inner:
        return YawBin.AT_WEARER
    if mag <= outer:
        return YawBin.RIGHT if delta > 0 else YawBin.LEFT
    return YawBin.FAR_RIGHT if delta > 0 else YawBin.FAR_LEFT


def _cross(a, b):
    """Row-wise cross product; cheaper than np.cross for small arrays."""
    return np.stack(
        [
            a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1],
            a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2],
            a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0],
        ],
        axis=-1,
    )


def _tangent_bases(rays):
    """Two unit vectors spanning the plane orthogonal to each ray."""
    helper = np.where(np.abs(rays[:, 1:2]) < 0.9, [[0.0, 1.0, 0.0]], [[1.0, 0.0, 0.0]])
    e1 = _cross(helper, rays)
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = _cross(rays, e1)
    return e1, e2


def _so3_exp(w):
    theta = np.linalg.norm(w)
    K = np.array([[0, -w[2], w[1]], [w[2], 0, -w[0]], [-w[1], w[0], 0]])
    if theta < 1e-12:
        return np.eye(3) + K
    return np.eye(3) + math.sin(theta) / theta * K + (1 - math.cos(theta)) / theta**2 * K @ K


def _dlt_init(rays, X, E):
    """Linear pose from ray constraints ``e . (P @ [X; 1]) = 0``."""
    c = X.mean(axis=0)
    s = np.sqrt(((X - c) ** 2).sum(axis=1).mean())
    Xn = np.hstack([(X - c) / s, np.ones((len(X), 1))])
    A = np.concatenate([np.einsum("ni,nk->nik", e, Xn).reshape(len(X), 12) for e in E])
    _, sv, Vt = np.linalg.svd(A)
    if sv[-2] < 1e-10 * sv[0]:
        raise DegenerateConfiguration("linear pose system has a multi-dimensional null space")
    P = Vt[-1].reshape(3, 4)
    # undo the normalisation: P @ [(X - c) / s; 1] = [M / s | p - M c / s] @ [X; 1]
    M = P[:, :3] / s
    p = P[:, 3] - M @ c
    if np.linalg.det(M) < 0:
        M, p = -M, -p
    U, S, Vt3 = np.linalg.svd(M)
    R = U @ Vt3
    t = p / S.mean()
    if np.mean(np.einsum("ni,ni->n", rays, X @ R.T + t)) < 0:
        t = -t
    return R, t


def _residuals(R, t, X, rays, e1, e2):
    P = X @ R.T + t
    depth = np.einsum("ni,ni->n", rays, P)
    a = np.einsum("ni,ni->n", e1, P) / depth
    b = np.einsum("ni,ni->n", e2, P) / depth
    return P, depth, a, b


def _weak_perspective_inits(rays, X):
    """Scaled-orthographic pose about the mean ray, plus its depth-reversed twin."""
    u0 = rays.mean(axis=0)
    u0 /= np.linalg.norm(u0)
    f1, f2 = _tangent_bases(u0[None, :])
    B = np.stack([f1[0], f2[0], u0])  # camera -> virtual camera looking along u0
    v = rays @ B.T
    x = v[:, :2] / v[:, 2:3]
    xc = x.mean(axis=0)
    Xc = X.mean(axis=0)
    A, *_ = np.linalg.lstsq(X - Xc, x - xc, rcond=None)
    U, S, Vt = np.linalg.svd(A.T, full_matrices=False)
    rows = U @ Vt
    scale = S.mean()
    out = []
    for flip in (1.0, -1.0):
        # negating both z components keeps the rows orthonormal
        r1, r2 = rows[0].copy(), rows[1].copy()
        r1[2] *= flip
        r2[2] *= flip
        Rv = np.stack([r1, r2, np.cross(r1, r2)])
        depth = 1.0 / scale
        tv = depth * np.array([xc[0], xc[1], 1.0]) - Rv @ Xc
        out.append((B.T @ Rv, B.T @ tv))
    return out


def _refine(R, t, X, rays, e1, e2, max_iter, tol):
    P, depth, a, b = _residuals(R, t, X, rays, e1, e2)
    cost = float(a @ a + b @ b)
    stalls = 0
    n = len(X)
    for _ in range(max_iter):
        # d(e . P / u . P) / dP
        inv = 1.0 / depth
        da = (e1 - a[:, None] * rays) * inv[:, None]
        db = (e2 - b[:, None] * rays) * inv[:, None]
        # left perturbation of R: dP = w x q with q = R X, so d(g . P)/dw = q x g
        q = P - t
        J = np.empty((2 * n, 6))
        J[:n, :3] = _cross(q, da)
        J[n:, :3] = _cross(q, db)
        J[:n, 3:] = da
        J[n:, 3:] = db
        r = np.concatenate([a, b])
        JtJ = J.T @ J
        colscale = np.sqrt(np.diag(JtJ))
        if np.any(colscale == 0) or np.linalg.cond(JtJ / np.outer(colscale, colscale)) > 1e12:
            raise DegenerateConfiguration("normal equations are rank deficient")
        step = -np.linalg.solve(JtJ, J.T @ r)
        R = _so3_exp(step[:3]) @ R
        t = t + step[3:]
        P, depth, a, b = _residuals(R, t, X, rays, e1, e2)
        new_cost = float(a @ a + b @ b)
        if np.linalg.norm(step) < tol:
            cost = new_cost
            break
        stalls = stalls + 1 if new_cost >= cost else 0
        cost = new_cost
        if stalls >= 10:
            raise NoConvergence("residual did not decrease for 10 consecutive iterations")
    if np.any(depth <= 0):
        raise DegenerateConfiguration("solution places the face behind the camera")
    return R, t, cost


def solve_pose(
    obs: LandmarkObservation,
    model: FaceModel3D,
    intr: CameraIntrinsics,
    max_iter: int = 50,
    tol: float = 1e-8,
) -> HeadPose:
    """Rotation and translation that best align the model with the observed rays.

    The linear estimate is refined by Gauss-Newton on tangent-plane residuals
    (tangent of the angle between each observed ray and the posed model point).
    """
    rays = undistort_points(obs.points[INTERIOR], intr, check_field=False)
    X = model.points[INTERIOR]
    e1, e2 = _tangent_bases(rays)

    def init_cost(Rt):
        _, depth, a, b = _residuals(Rt[0], Rt[1], X, rays, e1, e2)
        return np.inf if np.any(depth <= 0) else float(a @ a + b @ b)

    def linear():
        try:
            return [_dlt_init(rays, X, (e1, e2))]
        except DegenerateConfiguration:
            return []

    # the weak-perspective pair is cheap and usually enough; the linear
    # estimate is only computed when both of them fail to converge
    error = None
    for batch in (lambda: sorted(_weak_perspective_inits(rays, X), key=init_cost), linear):
        for R0, t0 in batch():
            try:
                R, t, _ = _refine(R0, t0, X, rays, e1, e2, max_iter, tol)
                break
            except (DegenerateConfiguration, NoConvergence) as exc:
                error = exc
        else:
            continue
        break
    else:
        raise error or DegenerateConfiguration("no initial pose available")

    reproj = project(model.points[INTERIOR] @ R.T + t, intr)
    rms = float(np.sqrt(np.mean(np.sum((reproj - obs.points[INTERIOR]) ** 2, axis=1))))
    yaw, pitch, roll = euler_from_rotation(R)
    return HeadPose(yaw, pitch, roll, t.copy(), rms, R)


def pose_points(model: FaceModel3D, yaw, pitch, roll, translation) -> np.ndarray:
    """Camera-frame model points for the given Euler angles (deg) and nose position (mm)."""
    R = rotation_from_euler(yaw, pitch, roll)
    return model.points @ R.T + np.asarray(translation, dtype=float)
