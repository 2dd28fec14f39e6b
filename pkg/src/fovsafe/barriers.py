"""Visibility barrier functions and their affine constraint rows.

Sixteen barriers pair each visibility plane i with each marker corner j:

    h_ij = a_i . x_j        (x_j = corner position in the camera frame)

plus one standoff barrier  h_z = (^A t_C)_z - zeta  keeping the camera at
least zeta in front of the marker plane.

For an end-effector twist u = [v, w] (E frame) and camera extrinsics
(R, tau) = ^E T_C, a world-fixed corner moves in the camera frame as
dx/dt = -R^T (v + w x (R x_j + tau)), which gives the affine row

    dh_ij/dt + gain * h_ij
        = -a_i^T R^T v + a_i^T R^T [R x_j + tau]_x w + gain * h_ij  >=  0.

The standoff row uses the camera-origin velocity seen from the marker frame:
d(^A t_C)/dt = M v - M [tau]_x w with M = ^A R_E.  All rows use a linear
class-K function alpha(h) = gain * h.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import CameraModel
from .se3 import RigidTransform, skew


@dataclass(frozen=True, eq=False)
class MarkerObservation:
    """Marker corners (4,3) and pose ^C T_A, both in one camera frame."""

    corners: np.ndarray
    pose: RigidTransform


@dataclass(frozen=True, eq=False)
class BarrierState:
    """Snapshot of every barrier value at one instant."""

    h: np.ndarray      # (4, 4): plane i (rows) x corner j (columns)
    h_z: float
    h_min: float       # min over the 16 plane/corner entries only (not h_z)


@dataclass(frozen=True, eq=False)
class ConstraintRow:
    """One affine constraint  cv . v + cw . w + constant >= 0."""

    cv: np.ndarray
    cw: np.ndarray
    constant: float

    def value(self, u: np.ndarray) -> float:
        return float(self.cv @ u[:3] + self.cw @ u[3:] + self.constant)


def stack_rows(rows) -> tuple[np.ndarray, np.ndarray]:
    """Rows -> (G, d) with the constraints reading G @ u + d >= 0."""
    g = np.array([np.concatenate([r.cv, r.cw]) for r in rows])
    d = np.array([r.constant for r in rows])
    return g, d


def barrier_values(camera: CameraModel, obs: MarkerObservation, zeta: float) -> BarrierState:
    """Evaluate all 17 barriers for one observation."""
    h = camera.normals @ obs.corners.T
    h_z = float(obs.pose.inverse().translation[2]) - zeta
    return BarrierState(h=h, h_z=h_z, h_min=float(h.min()))


def visibility_constraint_rows(
    camera: CameraModel,
    corners: np.ndarray,
    extrinsics: RigidTransform,
    gain: float,
) -> list[ConstraintRow]:
    """The 16 plane x corner rows, plane-major (i = 0 rows first).

    ``corners`` are the marker corners in the frame that ``extrinsics``
    (= ^E T_frame) locates; pass a tightened camera plus shifted corners to
    enforce the robustified field of view.
    """
    r, tau = extrinsics.rotation, extrinsics.translation
    rows = []
    for i in range(4):
        a = camera.normals[i]
        ra = r @ a
        for j in range(4):
            x = corners[j]
            rows.append(
                ConstraintRow(
                    cv=-ra,
                    cw=-skew(r @ x + tau) @ ra,
                    constant=gain * float(a @ x),
                )
            )
    return rows


def z_constraint_row(
    marker_pose: RigidTransform,
    extrinsics: RigidTransform,
    zeta: float,
    gain: float,
) -> ConstraintRow:
    """Standoff row for h_z = (^A t_C)_z - zeta, with marker_pose = ^C T_A."""
    cam_from_marker = marker_pose.inverse()
    m = marker_pose.rotation.T @ extrinsics.rotation.T  # ^A R_E
    mz = m[2]  # M^T z-hat
    return ConstraintRow(
        cv=mz,
        cw=skew(extrinsics.translation) @ mz,
        constant=gain * (float(cam_from_marker.translation[2]) - zeta),
    )
