"""Equidistant fisheye camera model.

Pixel coordinates are continuous with the principal point at
``(width / 2, height / 2)``. The camera frame is x right, y down,
z along the optical axis. A ray at angle ``theta`` from the axis lands
at radius ``r = f * theta`` from the principal point.
"""
from dataclasses import dataclass
import math

import numpy as np

from .errors import OutOfField


@dataclass(frozen=True)
class CameraIntrinsics:
    # 5 MP sensor of the chest-worn prototype camera
    width: int = 2592
    height: int = 1944
    fov_h: float = 170.0

    def __post_init__(self):
        if not 0 < self.fov_h <= 180:
            raise ValueError(f"fov_h must lie in (0, 180], got {self.fov_h}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image size must be positive")

    @property
    def focal(self) -> float:
        """Focal scale in px per radian."""
        return (self.width / 2) / math.radians(self.fov_h / 2)

    @property
    def center(self) -> np.ndarray:
        return np.array([self.width / 2, self.height / 2])

    @property
    def half_fov(self) -> float:
        return math.radians(self.fov_h / 2)


def project(directions, intr: CameraIntrinsics) -> np.ndarray:
    """Map camera-frame 3D points or directions (..., 3) to pixels (..., 2)."""
    v = np.asarray(directions, dtype=float)
    rho = np.hypot(v[..., 0], v[..., 1])
    theta = np.arctan2(rho, v[..., 2])
    # theta / rho is finite on the axis: the limit is 1 / z
    with np.errstate(invalid="ignore", divide="ignore"):
        k = np.where(rho > 0, theta / np.where(rho > 0, rho, 1.0), 1.0 / v[..., 2])
    r = intr.focal * k
    return np.stack([intr.center[0] + r * v[..., 0], intr.center[1] + r * v[..., 1]], axis=-1)


def undistort_points(points, intr: CameraIntrinsics, check_field: bool = True) -> np.ndarray:
    """Invert the equidistant mapping; returns unit rays with the same leading shape.

    Raises OutOfField when a point maps beyond half the horizontal field.
    """
    p = np.asarray(points, dtype=float)
    d = p - intr.center
    r = np.hypot(d[..., 0], d[..., 1])
    theta = r / intr.focal
    if check_field and np.any(theta > intr.half_fov + 1e-12):
        raise OutOfField(
            f"point at {math.degrees(float(theta.max())):.2f} deg exceeds half field {intr.fov_h / 2} deg"
        )
    s = np.sin(theta)
    with np.errstate(invalid="ignore", divide="ignore"):
        cx = np.where(r > 0, d[..., 0] / np.where(r > 0, r, 1.0), 0.0)
        cy = np.where(r > 0, d[..., 1] / np.where(r > 0, r, 1.0), 0.0)
    return np.stack([s * cx, s * cy, np.cos(theta)], axis=-1)
