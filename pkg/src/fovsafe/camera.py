"""Pinhole camera with the field of view described as four half-space planes.

The image rectangle is [0, W] x [0, L] in pixels, x right, y down, and its
corners are walked in the fixed order

    c0 = (0, 0),  c1 = (0, L),  c2 = (W, L),  c3 = (W, 0).

Back-projecting the corners gives unit view lines l_i (positive z), and each
adjacent pair spans a visibility plane through the optical center with inward
unit normal

    a_i = -(l_i x l_{i+1 mod 4}) / || . ||

so a 3-D point q (camera frame) is inside the field of view exactly when all
four margins a_i . q are non-negative.  The same construction works for any
(convex, same winding) corner quadrilateral, which is how the robustified
camera reuses it with pulled-in corners.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class Intrinsics:
    """Upper-triangular pinhole intrinsics (pixel units)."""

    fx: float
    fy: float
    cx: float
    cy: float
    skew: float = 0.0

    def __post_init__(self):
        if self.fx <= 0.0 or self.fy <= 0.0:
            raise ValueError("focal lengths fx, fy must be positive")

    @property
    def matrix(self) -> np.ndarray:
        return np.array(
            [
                [self.fx, self.skew, self.cx],
                [0.0, self.fy, self.cy],
                [0.0, 0.0, 1.0],
            ]
        )


def nominal_corners(width: float, length: float) -> np.ndarray:
    """Image-rectangle corners in the fixed winding used everywhere here."""
    return np.array(
        [
            [0.0, 0.0],
            [0.0, length],
            [width, length],
            [width, 0.0],
        ]
    )


def project(k: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Pinhole projection of camera-frame point(s) with q_z > 0 onto pixels."""
    q = np.asarray(q, dtype=float)
    single = q.ndim == 1
    pts = q[None, :] if single else q
    if np.any(pts[:, 2] <= 0.0):
        raise ValueError("cannot project points with non-positive depth")
    h = pts @ k.T
    px = h[:, :2] / h[:, 2:3]
    return px[0] if single else px


def view_lines(k: np.ndarray, corners: np.ndarray) -> np.ndarray:
    """Unit back-projection rays of pixel corners, forced to positive z."""
    kinv = np.linalg.inv(k)
    ones = np.ones((corners.shape[0], 1))
    d = np.hstack([corners, ones]) @ kinv.T
    nz = np.abs(d[:, 2])
    if np.any(nz < 1e-12 * np.linalg.norm(d, axis=1)):
        raise ValueError("corner ray parallel to the image plane")
    return d * (np.sign(d[:, 2]) / np.linalg.norm(d, axis=1))[:, None]


def visibility_normals(lines: np.ndarray) -> np.ndarray:
    """Inward unit normals of the four planes spanned by adjacent view lines."""
    nxt = np.roll(lines, -1, axis=0)
    a = -np.cross(lines, nxt)
    norms = np.linalg.norm(a, axis=1)
    if np.any(norms < 1e-12):
        raise ValueError("adjacent view lines are parallel; field of view is degenerate")
    a = a / norms[:, None]
    centroid = lines.mean(axis=0)
    if np.any(a @ centroid <= 0.0):
        raise ValueError("visibility normals do not point into the field of view; check corner winding")
    return a


@dataclass(frozen=True, eq=False)
class CameraModel:
    """Intrinsics plus the (possibly tightened) corner set and derived planes."""

    intrinsics: Intrinsics
    width: float
    length: float
    corners: np.ndarray
    lines: np.ndarray
    normals: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        return self.intrinsics.matrix

    def margins(self, q: np.ndarray) -> np.ndarray:
        """Signed distances of camera-frame point(s) to the four planes."""
        return np.asarray(q, dtype=float) @ self.normals.T

    def contains(self, q: np.ndarray) -> np.ndarray:
        """True where all four margins are non-negative."""
        m = self.margins(q)
        return m.min(axis=-1) >= 0.0

    def project(self, q: np.ndarray) -> np.ndarray:
        return project(self.matrix, q)


def camera_model(
    intrinsics: Intrinsics,
    width: float,
    length: float,
    corners: np.ndarray | None = None,
) -> CameraModel:
    """Build a CameraModel; pass explicit corners to describe a tightened FOV."""
    if width <= 0.0 or length <= 0.0:
        raise ValueError("image width and length must be positive")
    if corners is None:
        corners = nominal_corners(width, length)
    corners = np.array(corners, dtype=float)
    if corners.shape != (4, 2):
        raise ValueError("corners must have shape (4, 2)")
    k = intrinsics.matrix
    lines = view_lines(k, corners)
    return CameraModel(
        intrinsics=intrinsics,
        width=float(width),
        length=float(length),
        corners=corners,
        lines=lines,
        normals=visibility_normals(lines),
    )


def unit_camera() -> CameraModel:
    """fx = fy = 1, principal point (1, 1), 2 x 2 image; handy in tests."""
    return camera_model(Intrinsics(1.0, 1.0, 1.0, 1.0), 2.0, 2.0)
