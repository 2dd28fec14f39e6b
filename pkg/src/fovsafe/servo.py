"""Position-based visual servoing toward a goal end-effector frame.

A twist is a 6-vector ``u = [v, w]``: translational then angular velocity,
both expressed in the current end-effector frame E.  The feature vector for
a goal frame E* is

    s = [ t ; theta * b ]     with   (R, t) = ^{E*} T_{E},  theta*b = log R

and the proportional law

    v = -sigma * R^T t,     w = -sigma * theta * b

drives s along ds/dt = -sigma * s, so the error norm decays as
exp(-sigma * t) in continuous time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .se3 import RigidTransform, rotation_to_vector, skew


@dataclass(frozen=True, eq=False)
class FeatureError:
    """PBVS feature error plus the pieces the law and its Jacobian reuse."""

    vector: np.ndarray        # (6,) [translation; rotation-vector]
    rotation: np.ndarray      # ^{E*} R_E
    near_pi: bool             # axis of the rotation part was sign-ambiguous

    @property
    def translation(self) -> np.ndarray:
        return self.vector[:3]

    @property
    def rotvec(self) -> np.ndarray:
        return self.vector[3:]


def feature_error(goal_from_current: RigidTransform) -> FeatureError:
    """Build the feature error from ``^{E*} T_{E}``."""
    rv, near_pi = rotation_to_vector(goal_from_current.rotation, with_ambiguity=True)
    return FeatureError(
        vector=np.concatenate([goal_from_current.translation, rv]),
        rotation=goal_from_current.rotation,
        near_pi=near_pi,
    )


def servo_twist(sigma: float, err: FeatureError) -> np.ndarray:
    """Proportional PBVS twist; satisfies interaction_matrix(err) @ u == -sigma * e."""
    if sigma < 0.0:
        raise ValueError("sigma must be non-negative")
    v = -sigma * (err.rotation.T @ err.translation)
    w = -sigma * err.rotvec
    return np.concatenate([v, w])


def _rotvec_rate_matrix(rv: np.ndarray) -> np.ndarray:
    """Matrix L with d(theta*b)/dt = L w for body angular velocity w.

    For R = ^{E*}R_E evolving as dR/dt = R [w]x, the rotation vector rate is
    the inverse right Jacobian of SO(3),

        L = I + (theta/2)[b]x + (1 - (theta/2) cot(theta/2)) [b]x^2,

    evaluated in the uniformly stable form
    I + 0.5 [rv]x + cbar(theta) [rv]x^2 with cbar = (1 - (t/2)cot(t/2)) / t^2.
    (The skew term appears with a minus sign in texts that parametrize the
    transpose rotation or use a spatial-frame angular velocity; the sign here
    is the one consistent with body twists, which is what the simulator
    integrates, as finite differences confirm.)  Since [rv]x rv = 0, the
    sign does not affect L @ (-sigma rv) = -sigma rv, i.e. the servo law's
    exact exponential decay holds either way.
    """
    theta2 = float(rv @ rv)
    if theta2 < 1e-8:
        cbar = 1.0 / 12.0 + theta2 / 720.0 + theta2 * theta2 / 30240.0
    else:
        theta = np.sqrt(theta2)
        half = 0.5 * theta
        cbar = (1.0 - half * np.cos(half) / np.sin(half)) / theta2
    k = skew(rv)
    return np.eye(3) + 0.5 * k + cbar * (k @ k)


def interaction_matrix(err: FeatureError) -> np.ndarray:
    """6x6 map from the end-effector twist to ds/dt (block diagonal)."""
    l = np.zeros((6, 6))
    l[:3, :3] = err.rotation
    l[3:, 3:] = _rotvec_rate_matrix(err.rotvec)
    return l


def saturate_twist(u: np.ndarray, v_max: float, w_max: float) -> tuple[np.ndarray, float]:
    """Scale a twist uniformly so every component respects the magnitude caps.

    Uniform scaling (instead of per-component clipping) keeps the twist
    direction, and - because the barrier constraint rows are affine with a
    non-negative constant term whenever the barriers themselves are
    non-negative - a uniformly shrunk feasible twist stays feasible.
    Returns the scaled twist and the scale factor actually applied (<= 1).
    """
    vmag = np.max(np.abs(u[:3]))
    wmag = np.max(np.abs(u[3:]))
    scale = 1.0
    if vmag > v_max:
        scale = min(scale, v_max / vmag)
    if wmag > w_max:
        scale = min(scale, w_max / wmag)
    return u * scale, scale
