"""Minimal SO(3)/SE(3) kernel used by every other module.

Conventions
-----------
* A rotation matrix named ``R_AB`` (written ``^A R_B``) maps B-frame
  coordinates into the A frame; ``RigidTransform`` follows the same
  parent-child reading, so ``T_AB.apply(p_B) == p_A``.
* Rotation vectors are axis * angle, in radians, with the canonical
  angle in [0, pi].
* Everything is plain float64 numpy; arrays handed to constructors are
  copied and must be treated as immutable afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Below this angle the closed Rodrigues coefficients lose precision and the
# Taylor forms are exact to double precision.
_SMALL_ANGLE = 1e-6
# Within this distance of pi the rotation axis is recovered from R + I.
_NEAR_PI = 1e-6


def skew(v: np.ndarray) -> np.ndarray:
    """Cross-product matrix: skew(v) @ u == np.cross(v, u)."""
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


def rotation_from_vector(rv: np.ndarray) -> np.ndarray:
    """Rodrigues map from a rotation vector to a rotation matrix."""
    rv = np.asarray(rv, dtype=float)
    theta2 = float(rv @ rv)
    if theta2 < _SMALL_ANGLE**2:
        # sin(t)/t and (1-cos(t))/t^2 to fourth order; exact in float64 here.
        a = 1.0 - theta2 / 6.0
        b = 0.5 - theta2 / 24.0
    else:
        theta = np.sqrt(theta2)
        a = np.sin(theta) / theta
        b = (1.0 - np.cos(theta)) / theta2
    k = skew(rv)
    return np.eye(3) + a * k + b * (k @ k)


def rotation_to_vector(r: np.ndarray, *, with_ambiguity: bool = False):
    """Log map: rotation matrix -> canonical rotation vector (angle in [0, pi]).

    At angles within ``1e-6`` of pi the axis sign is ambiguous; it is fixed
    deterministically by making the largest-magnitude axis component
    positive, and ``with_ambiguity=True`` additionally returns that flag.
    """
    tr = float(np.trace(r))
    c = min(1.0, max(-1.0, (tr - 1.0) / 2.0))
    theta = float(np.arccos(c))
    vee = np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])

    near_pi = (np.pi - theta) < _NEAR_PI
    if theta < _SMALL_ANGLE:
        rv = (0.5 + theta * theta / 12.0) * vee
    elif near_pi:
        # R + I = (1 + cos) I + (1 - cos) 2 b b^T + sin [b]x; at theta ~ pi the
        # diagonal of (R + I)/2 is dominated by b b^T.
        bbt = (r + np.eye(3)) / 2.0
        k = int(np.argmax(np.diag(bbt)))
        axis = bbt[:, k] / np.sqrt(max(bbt[k, k], 1e-300))
        axis = axis / np.linalg.norm(axis)
        if axis[int(np.argmax(np.abs(axis)))] < 0.0:
            axis = -axis
        rv = theta * axis
    else:
        rv = (theta / (2.0 * np.sin(theta))) * vee

    if with_ambiguity:
        return rv, bool(near_pi)
    return rv


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Rigid pose ``^parent T_child``: rotation (3,3) and translation (3,)."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.array(self.rotation, dtype=float))
        object.__setattr__(self, "translation", np.array(self.translation, dtype=float))
        if self.rotation.shape != (3, 3) or self.translation.shape != (3,):
            raise ValueError("RigidTransform needs a (3,3) rotation and (3,) translation")

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(np.eye(3), np.zeros(3))

    @staticmethod
    def from_rotvec(rv, t) -> "RigidTransform":
        return RigidTransform(rotation_from_vector(np.asarray(rv, float)), t)

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """``T_AB.compose(T_BC) == T_AC``."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return self.compose(other)

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map child-frame point(s), shape (3,) or (n, 3), into the parent frame."""
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            return self.rotation @ points + self.translation
        return points @ self.rotation.T + self.translation

    def rotvec(self) -> np.ndarray:
        return rotation_to_vector(self.rotation)


def twist_exponential(v: np.ndarray, w: np.ndarray, dt: float) -> RigidTransform:
    """Exact SE(3) exponential of a constant body twist (v, w) held for dt.

    Returns the child-relative-to-parent motion, i.e. T(t + dt) = T(t) @ exp.
    Because it is a true group exponential, applying (v, w) and then
    (-v, -w) for the same dt composes to the identity exactly.
    """
    phi = np.asarray(w, dtype=float) * dt
    theta2 = float(phi @ phi)
    if theta2 < _SMALL_ANGLE**2:
        b = 0.5 - theta2 / 24.0
        c = 1.0 / 6.0 - theta2 / 120.0
    else:
        theta = np.sqrt(theta2)
        b = (1.0 - np.cos(theta)) / theta2
        c = (theta - np.sin(theta)) / (theta2 * theta)
    k = skew(phi)
    jl = np.eye(3) + b * k + c * (k @ k)
    return RigidTransform(rotation_from_vector(phi), jl @ (np.asarray(v, dtype=float) * dt))


def random_unit_vector(rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=3)
    n = np.linalg.norm(v)
    while n < 1e-12:
        v = rng.normal(size=3)
        n = np.linalg.norm(v)
    return v / n


def random_rotation_vector(
    rng: np.random.Generator, max_angle: float, *, on_boundary: bool = False
) -> np.ndarray:
    """Rotation vector with uniform random axis and angle <= max_angle.

    The angle is drawn uniformly (not Haar-uniform over the ball), which is
    what the verification samplers want: it oversamples large angles where
    the bounds are tight.
    """
    angle = max_angle if on_boundary else max_angle * rng.random()
    return angle * random_unit_vector(rng)


def random_in_ball(rng: np.random.Generator, radius: float, *, on_boundary: bool = False) -> np.ndarray:
    """Point in (or on) the radius-ball, again biased uniformly in radius."""
    r = radius if on_boundary else radius * rng.random()
    return r * random_unit_vector(rng)
