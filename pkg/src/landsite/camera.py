"""Pinhole camera model, poses, and the shared projection used by the whole pipeline.

Conventions:
    World frame: x east, y north, z up (meters).
    Camera frame: +z optical axis (forward), +x right (+u), +y down (+v).
    Quaternions are (w, x, y, z), camera-to-world, unit norm.
    A nadir camera flying upright is quaternion (0, 1, 0, 0): camera x maps
    to world +x, camera z points straight down.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CameraModel:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 < self.cx < self.width) or not (0 < self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    def scaled(self, factor: float) -> "CameraModel":
        """Camera for an image resized by `factor` (0.5 halves the resolution)."""
        return CameraModel(
            fx=self.fx * factor,
            fy=self.fy * factor,
            cx=self.cx * factor,
            cy=self.cy * factor,
            width=int(round(self.width * factor)),
            height=int(round(self.height * factor)),
        )


@dataclass(frozen=True)
class Pose:
    """Camera pose: position in world coordinates plus camera-to-world quaternion."""

    position: np.ndarray  # (3,) m
    quaternion: np.ndarray  # (4,) (w, x, y, z), unit

    def __post_init__(self):
        p = np.asarray(self.position, dtype=float).reshape(3)
        q = np.asarray(self.quaternion, dtype=float).reshape(4)
        n = np.linalg.norm(q)
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"quaternion norm {n} not within 1e-9 of 1")
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "quaternion", q)

    @property
    def rotation(self) -> np.ndarray:
        """3x3 camera-to-world rotation matrix."""
        return quat_to_matrix(self.quaternion)


NADIR_QUAT = np.array([0.0, 1.0, 0.0, 0.0])


def quat_to_matrix(q) -> np.ndarray:
    """Convert a unit quaternion (w, x, y, z) to a 3x3 rotation matrix."""
    w, x, y, z = np.asarray(q, dtype=float).reshape(4)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def project(points_w: np.ndarray, pose: Pose, camera: CameraModel):
    """Project world points to pixel coordinates.

    Returns (uv, depth): uv is (N, 2), depth the camera-frame z. Points with
    depth <= 0 are behind the camera; their uv values are not meaningful.
    """
    pts = np.atleast_2d(np.asarray(points_w, dtype=float))
    rel = pts - pose.position[None, :]
    pc = rel @ pose.rotation  # R^T applied row-wise
    depth = pc[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = camera.fx * pc[:, 0] / depth + camera.cx
        v = camera.fy * pc[:, 1] / depth + camera.cy
    return np.stack([u, v], axis=1), depth


def pixel_rays(uv: np.ndarray, pose: Pose, camera: CameraModel) -> np.ndarray:
    """Unit world-frame ray directions through the given pixels."""
    uv = np.atleast_2d(np.asarray(uv, dtype=float))
    d = np.stack(
        [
            (uv[:, 0] - camera.cx) / camera.fx,
            (uv[:, 1] - camera.cy) / camera.fy,
            np.ones(len(uv)),
        ],
        axis=1,
    )
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return d @ pose.rotation.T


def in_bounds(uv: np.ndarray, camera: CameraModel, margin: float = 0.0) -> np.ndarray:
    """Boolean mask of pixels at least `margin` px inside the image rectangle."""
    uv = np.atleast_2d(uv)
    return (
        (uv[:, 0] >= margin)
        & (uv[:, 0] <= camera.width - 1 - margin)
        & (uv[:, 1] >= margin)
        & (uv[:, 1] <= camera.height - 1 - margin)
    )
