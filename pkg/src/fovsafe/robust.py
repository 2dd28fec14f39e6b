"""Robustification of the visibility constraints to camera-calibration error.

The camera pose carried in the kinematic chain (the "believed" camera frame,
here C-hat) can differ from the physical one by a bounded error: translation
norm <= delta and rotation angle <= epsilon.  Safety is restored by enforcing
visibility w.r.t. a virtual camera C-tilde that is

* shifted forward along the optical axis by z_tilde, absorbing translation
  error (plus the apex clearance lost to rotation error), and
* given pulled-in image corners so every tightened view line keeps an
  angular clearance of epsilon from every nominal visibility plane,

which makes the tightened field of view a subset of the physical one for
every admissible error.  Both constructions are validated by brute
Monte-Carlo containment sampling (``fov_containment_check``).

Because the marker corners are measured in the *physical* camera frame, the
tightened constraint rows also contain the unknown error.  ``ThetaBounds``
evaluates a certified lower bound Theta-tilde(u) of each row by bounding the
error-dependent terms separately:

    Theta  = Theta0(u) + mu1.t_e + mu1.(R_e x) + gain*a.(R_e x) + gain*a.t_e
    Theta~ = Theta0(u) - delta||mu1|| + cap(mu1, x) + gain*cap(a, x) - gain*delta

with mu1 = (R^T w) x a (linear in w) and cap(p, x) the exact minimum of
p . (R_e x) over rotations of angle <= epsilon:

    cap(p, x) = ||p|| ||x|| cos(min(pi, angle(p, x) + epsilon)).

Theta-tilde is concave in u (affine part plus minima of linear functionals
of w), so { u : Theta-tilde(u) >= 0 } is convex and first-order
linearizations are outer approximations - the property the sequential QP in
the twist filter relies on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import CameraModel, camera_model, project
from .se3 import RigidTransform, random_rotation_vector, rotation_from_vector, skew

_VIOLATION_TOL = 1e-12
# Tiny inflation of the required angular clearance; costs nanoradians of
# field of view and keeps boundary-of-the-error-set samples strictly safe.
_CLEARANCE_PAD = 1e-9


@dataclass(frozen=True)
class ErrorBounds:
    """Assumed calibration error: ||t|| <= delta (m), angle <= epsilon (rad)."""

    delta: float
    epsilon: float

    def __post_init__(self):
        if self.delta < 0.0:
            raise ValueError("delta must be non-negative")
        if not 0.0 <= self.epsilon < np.pi / 2.0:
            raise ValueError("epsilon must lie in [0, pi/2)")


@dataclass(frozen=True, eq=False)
class RobustCamera:
    """Virtual camera whose field of view survives any admissible error."""

    base: CameraModel
    tightened: CameraModel          # same intrinsics, pulled-in corners
    frame_shift: RigidTransform     # identity rotation, (0, 0, z_tilde)
    bounds: ErrorBounds

    @property
    def shift(self) -> np.ndarray:
        return self.frame_shift.translation


def robust_z_offset(camera: CameraModel, delta: float, epsilon: float = 0.0) -> float:
    """Forward shift that keeps the virtual apex inside every perturbed FOV.

    For pure translation error the tight value is delta / min_i a_{i,z}.
    With rotation error present each plane normal can additionally tilt by
    epsilon, so the worst apex clearance per unit of shift becomes
    cos(angle(a_i, z) + epsilon); epsilon = 0 reduces to the former.
    """
    if delta < 0.0:
        raise ValueError("delta must be non-negative")
    az = camera.normals[:, 2]
    if np.min(az) <= 0.0:
        raise ValueError("field of view spans a hemisphere (min normal z <= 0); cannot robustify")
    worst = np.cos(np.minimum(np.pi, np.arccos(np.clip(az, -1.0, 1.0)) + epsilon))
    if np.min(worst) <= 0.0:
        raise ValueError("epsilon tilts a visibility plane past the optical plane; cannot robustify")
    return float(delta / np.min(worst))


def shrink_corners(camera: CameraModel, epsilon: float) -> np.ndarray:
    """Pull each image corner inward along its diagonal until the corner ray
    clears every visibility plane by the angular margin epsilon.

    The clearance condition  a_i . l >= sin(epsilon)  is exactly the
    requirement that the ray stays inside the field of view of every camera
    rotated by at most epsilon, so the corner set is sound and tight along
    the pull direction.  epsilon = 0 returns the corners unchanged.
    """
    if not 0.0 <= epsilon < np.pi / 2.0:
        raise ValueError("epsilon must lie in [0, pi/2)")
    corners = camera.corners
    if epsilon == 0.0:
        return corners.copy()
    kinv = np.linalg.inv(camera.matrix)
    normals = camera.normals
    target = np.sin(epsilon) + _CLEARANCE_PAD
    center = corners.mean(axis=0)
    out = np.empty_like(corners)
    for j in range(4):
        direction = center - corners[j]
        span = np.linalg.norm(direction)
        direction = direction / span

        def clearance(d: float) -> float:
            px = corners[j] + d * direction
            ray = kinv @ np.array([px[0], px[1], 1.0])
            ray = ray / np.linalg.norm(ray)
            return float(np.min(normals @ ray)) - target

        if clearance(0.0) >= 0.0:
            out[j] = corners[j]
            continue
        hi = 0.95 * span
        if clearance(hi) < 0.0:
            raise ValueError("epsilon leaves no usable field of view for this camera")
        lo = 0.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if clearance(mid) >= 0.0:
                hi = mid
            else:
                lo = mid
        out[j] = corners[j] + hi * direction
    return out


def probe_shrink_radii(camera: CameraModel, epsilon: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-corner pull-in radii from a single probe rotation of each view line.

    Each corner ray is rotated by epsilon about the axis
    normalize(l_x, -l_y, 0), reprojected, and the pixel displacement taken as
    a pull-in radius; corners move inward by radius/sqrt(2) per axis.
    Returns (radii, pulled corners).

    Diagnostic only: the projected set of all epsilon-rotations of a view
    line is not a disc of this radius (rotations about other axes project
    farther), so these corners do NOT guarantee containment.  The production
    tightening is the angular-clearance rule in ``shrink_corners``; the
    containment checks measure the difference.
    """
    if not 0.0 <= epsilon < np.pi / 2.0:
        raise ValueError("epsilon must lie in [0, pi/2)")
    corners = camera.corners
    center = corners.mean(axis=0)
    radii = np.empty(4)
    pulled = np.empty_like(corners)
    for j in range(4):
        line = camera.lines[j]
        axis = np.array([line[0], -line[1], 0.0])
        norm = np.linalg.norm(axis)
        if norm < 1e-12:
            radii[j] = 0.0
            pulled[j] = corners[j]
            continue
        rotated = rotation_from_vector(epsilon * axis / norm) @ line
        pixel = project(camera.matrix, rotated)
        radii[j] = float(np.linalg.norm(pixel - corners[j]))
        direction = np.sign(center - corners[j])
        pulled[j] = corners[j] + direction * (radii[j] / np.sqrt(2.0))
    return radii, pulled


def robust_camera(camera: CameraModel, bounds: ErrorBounds) -> RobustCamera:
    """Tightened camera plus forward frame shift for the given error bounds."""
    z = robust_z_offset(camera, bounds.delta, bounds.epsilon)
    tightened = camera_model(
        camera.intrinsics, camera.width, camera.length, shrink_corners(camera, bounds.epsilon)
    )
    return RobustCamera(
        base=camera,
        tightened=tightened,
        frame_shift=RigidTransform(np.eye(3), np.array([0.0, 0.0, z])),
        bounds=bounds,
    )


# ---------------------------------------------------------------------------
# Monte-Carlo verification reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VerificationReport:
    violations: int
    samples: int
    worst_margin: float
    seed: int

    def as_dict(self) -> dict:
        return {
            "violations": self.violations,
            "samples": self.samples,
            "worst_margin": self.worst_margin,
            "seed": self.seed,
        }


def skew_stack(vs: np.ndarray) -> np.ndarray:
    """(n,3) -> (n,3,3) stack of cross-product matrices."""
    n = vs.shape[0]
    out = np.zeros((n, 3, 3))
    out[:, 0, 1] = -vs[:, 2]
    out[:, 0, 2] = vs[:, 1]
    out[:, 1, 0] = vs[:, 2]
    out[:, 1, 2] = -vs[:, 0]
    out[:, 2, 0] = -vs[:, 1]
    out[:, 2, 1] = vs[:, 0]
    return out


def batch_rotations(rotvecs: np.ndarray) -> np.ndarray:
    """Vectorized Rodrigues map, rotation vectors (n,3) -> matrices (n,3,3)."""
    theta = np.linalg.norm(rotvecs, axis=1)
    small = theta < 1e-8
    safe = np.where(small, 1.0, theta)
    a = np.where(small, 1.0 - theta**2 / 6.0, np.sin(safe) / safe)
    b = np.where(small, 0.5 - theta**2 / 24.0, (1.0 - np.cos(safe)) / safe**2)
    k = skew_stack(rotvecs)
    kk = np.einsum("nab,nbc->nac", k, k)
    return np.eye(3)[None, :, :] + a[:, None, None] * k + b[:, None, None] * kk


def sample_errors(
    rng: np.random.Generator, bounds: ErrorBounds, n: int
) -> tuple[np.ndarray, np.ndarray]:
    """Admissible (rotation, translation) error draws, half on the boundary."""
    axes = rng.normal(size=(n, 3))
    axes /= np.linalg.norm(axes, axis=1, keepdims=True)
    angles = bounds.epsilon * rng.random(n)
    angles[rng.random(n) < 0.5] = bounds.epsilon
    rots = batch_rotations(axes * angles[:, None])
    tdir = rng.normal(size=(n, 3))
    tdir /= np.linalg.norm(tdir, axis=1, keepdims=True)
    radii = bounds.delta * rng.random(n)
    radii[rng.random(n) < 0.5] = bounds.delta
    return rots, tdir * radii[:, None]


def fov_containment_check(
    outer: CameraModel,
    inner: CameraModel,
    shift: np.ndarray,
    bounds: ErrorBounds,
    n_frames: int = 10_000,
    n_points: int = 1_000,
    seed: int = 0,
) -> VerificationReport:
    """Sample perturbed physical frames and test that the (shifted) inner
    field of view stays inside every one of them.

    Points are taken along the four inner corner rays at ranges on a log
    grid from 1 mm to 1 km; a sample violates when its margin to any outer
    visibility plane, evaluated in the perturbed frame, drops below -1e-12.
    """
    rng = np.random.default_rng(seed)
    lam = np.logspace(-3.0, 3.0, max(1, n_points // 4))
    pts = (np.asarray(shift)[None, None, :] + lam[None, :, None] * inner.lines[:, None, :]).reshape(-1, 3)
    per_frame = pts.shape[0]

    worst = np.inf
    violations = 0
    done = 0
    chunk = max(1, min(n_frames, 200_000 // per_frame))
    while done < n_frames:
        n = min(chunk, n_frames - done)
        rots, trans = sample_errors(rng, bounds, n)
        rel = pts[None, :, :] - trans[:, None, :]
        local = np.einsum("fba,fpb->fpa", rots, rel)
        margins = np.einsum("fpa,ia->fpi", local, outer.normals)
        m = margins.min(axis=2)
        worst = min(worst, float(m.min()))
        violations += int(np.count_nonzero(m < -_VIOLATION_TOL))
        done += n
    return VerificationReport(
        violations=violations,
        samples=n_frames * per_frame,
        worst_margin=worst,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Lower bounds for the tightened constraint rows (unknown-frame measurement)
# ---------------------------------------------------------------------------


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Broadcast cross product without np.cross's per-call overhead."""
    out = np.empty(np.broadcast_shapes(a.shape, b.shape))
    out[..., 0] = a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1]
    out[..., 1] = a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2]
    out[..., 2] = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
    return out


def _cap_min(p: np.ndarray, pn: np.ndarray, x: np.ndarray, xn: np.ndarray, eps: float):
    """Elementwise min over rotations R (angle <= eps) of p . (R x).

    ``p`` and ``x`` are broadcast-compatible stacks of 3-vectors with
    precomputed norms.  For angle(p, x) + eps < pi the minimum sits on the
    boundary of the rotation set and equals
    cos(eps) p.x - sin(eps) ||x cross p||; beyond it the antipode -||p||||x||
    is reachable.
    """
    dot = np.sum(p * x, axis=-1)
    cross = np.linalg.norm(_cross(x, p), axis=-1)
    angle = np.arctan2(cross, dot)
    boundary = np.cos(eps) * dot - np.sin(eps) * cross
    return np.where(angle + eps >= np.pi, -pn * xn, boundary)


class ThetaBounds:
    """Certified lower bounds of the 16 tightened constraint rows.

    Built once per control step from the tightened camera, the measured
    corner positions x_j (physical-camera frame), the believed extrinsics
    ^E T_C-hat, the frame shift and the error bounds.  Rows are plane-major:
    row 4*i + j pairs visibility plane i with marker corner j.
    """

    def __init__(
        self,
        robust: RobustCamera,
        corners: np.ndarray,
        extrinsics: RigidTransform,
        gain: float,
    ):
        self.gain = float(gain)
        self.delta = robust.bounds.delta
        self.epsilon = robust.bounds.epsilon
        self.normals = robust.tightened.normals          # (4,3) a~
        self.x = np.array(corners, dtype=float)          # (4,3) measured
        self.xn = np.linalg.norm(self.x, axis=1)
        self.q = robust.shift
        self.r = extrinsics.rotation                     # ^E R_C-hat
        self.t = extrinsics.translation                  # ^E t_C-hat

        self.b = self.normals @ self.r.T                 # rows: R a~_i
        self.cw0 = -(self.b @ skew(self.t).T)            # rows: -[t]x (R a~_i)
        self.const0 = -self.gain * (self.normals @ self.q)
        # gain * cap(a~_i, x_j): independent of u
        self.theta3 = self.gain * _cap_min(
            self.normals[:, None, :], np.ones((4, 1)),
            self.x[None, :, :], self.xn[None, :], self.epsilon,
        )
        self.theta4 = -self.gain * self.delta
        self.at = self.r @ skew_stack(self.normals)      # (4,3,3) A_i^T = R [a~_i]x
        self._ce = np.cos(self.epsilon)
        self._se = np.sin(self.epsilon)

    # -- evaluation ---------------------------------------------------------
    def _mu1(self, w: np.ndarray) -> np.ndarray:
        """(4,3) stack of mu1_i = (R^T w) x a~_i."""
        return _cross((self.r.T @ w)[None, :], self.normals)

    def theta0(self, u: np.ndarray) -> np.ndarray:
        """(4,) known affine part per plane (identical for the 4 corners)."""
        return -(self.b @ u[:3]) + self.cw0 @ u[3:] + self.const0

    def values(self, u: np.ndarray) -> np.ndarray:
        """(16,) lower bounds Theta-tilde(u), plane-major."""
        return self.values_batch(u[None, :])[0]

    def values_batch(self, u: np.ndarray) -> np.ndarray:
        """(n,16) lower bounds for a batch of twists (n,6)."""
        wt = u[:, 3:] @ self.r                            # rows: R^T w
        mu = _cross(wt[:, None, :], self.normals[None, :, :])
        mun = np.linalg.norm(mu, axis=2)
        theta0 = -(u[:, :3] @ self.b.T) + u[:, 3:] @ self.cw0.T + self.const0
        theta2 = _cap_min(
            mu[:, :, None, :], mun[:, :, None],
            self.x[None, None, :, :], self.xn[None, None, :], self.epsilon,
        )
        rows = (
            theta0[:, :, None]
            - self.delta * mun[:, :, None]
            + theta2
            + self.theta3[None, :, :]
            + self.theta4
        )
        return rows.reshape(u.shape[0], 16)

    def gradients(self, u: np.ndarray) -> np.ndarray:
        """(16,6) supergradients of the concave rows at u.

        At the nonsmooth points (mu1 = 0, or x parallel to mu1) a valid
        supergradient is substituted, preserving the outer-approximation
        property of the linearization.
        """
        mu = self._mu1(u[3:])                            # (4,3)
        mun = np.linalg.norm(mu, axis=1)                 # (4,)
        ok = mun > 1e-12
        muh = mu / np.maximum(mun, 1e-300)[:, None]
        cross = _cross(self.x[None, :, :], mu[:, None, :])   # (i,j,3): x_j x mu_i
        crossn = np.linalg.norm(cross, axis=2)
        angle = np.arctan2(crossn, mu @ self.x.T)
        far = angle + self.epsilon >= np.pi
        parallel = crossn <= 1e-12 * np.maximum(1.0, self.xn[None, :] * mun[:, None])
        chat = cross / np.maximum(crossn, 1e-300)[:, :, None]
        smooth = self._ce * self.x[None, :, :] - self._se * _cross(chat, self.x[None, :, :])
        g2 = np.where(
            far[:, :, None],
            -self.xn[None, :, None] * muh[:, None, :],
            np.where(parallel[:, :, None], self._ce * self.x[None, :, :], smooth),
        )
        g_mu = g2 - self.delta * muh[:, None, :]
        # mu1 = 0 is a nonsmooth point of both mu-dependent terms; zero is a
        # valid supergradient for -delta||mu1|| there and cos(eps) x for the cap.
        g_mu = np.where(ok[:, None, None], g_mu, self._ce * self.x[None, :, :])
        grads = np.empty((4, 4, 6))
        grads[:, :, :3] = -self.b[:, None, :]
        grads[:, :, 3:] = self.cw0[:, None, :] + np.einsum("iab,ijb->ija", self.at, g_mu)
        return grads.reshape(16, 6)

    # -- ground truth for verification --------------------------------------
    def exact_values(self, u: np.ndarray, error: RigidTransform) -> np.ndarray:
        """(16,) exact row values Theta(u) for a known error ^C-hat T_C."""
        return self.exact_values_batch(
            u[None, :], error.rotation[None, :, :], error.translation[None, :]
        )[0]

    def exact_values_batch(
        self, u: np.ndarray, rots: np.ndarray, trans: np.ndarray
    ) -> np.ndarray:
        """(n,16) exact rows for batches of twists and known errors."""
        xt = np.einsum("nab,jb->nja", rots, self.x) + trans[:, None, :] - self.q
        tau = self.t + self.r @ self.q
        s = xt @ self.r.T + tau[None, None, :]            # corners in E frame
        swx = np.cross(s, u[:, None, 3:])                 # s x w
        rows = (
            -(u[:, :3] @ self.b.T)[:, :, None]
            + np.einsum("ia,nja->nij", self.b, swx)
            + self.gain * np.einsum("ia,nja->nij", self.normals, xt)
        )
        return rows.reshape(u.shape[0], 16)

    def decomposition_terms(self, u: np.ndarray) -> dict:
        """Diagnostics: the five bound terms per row (16,5) plus mu1 data."""
        mu = self._mu1(u[3:])
        mun = np.linalg.norm(mu, axis=1)
        theta2 = _cap_min(
            mu[:, None, :], mun[:, None], self.x[None, :, :], self.xn[None, :], self.epsilon
        )
        t0 = np.repeat(self.theta0(u)[:, None], 4, axis=1)
        t1 = np.repeat(-self.delta * mun[:, None], 4, axis=1)
        terms = np.stack(
            [
                t0.reshape(-1),
                t1.reshape(-1),
                theta2.reshape(-1),
                self.theta3.reshape(-1),
                np.full(16, self.theta4),
            ],
            axis=1,
        )
        return {"terms": terms, "mu1": mu, "mu1_norm": mun}

    def sweep_lower(self, u: np.ndarray, n_directions: int = 64) -> np.ndarray:
        """(16,) brute-force estimate: min of the exact rows over boundary
        rotations (Fibonacci-sphere axes) with the per-row worst translation.

        Always >= the certified bound up to float noise; the difference is
        the tightness gap introduced by bounding the terms separately.
        """
        k = np.arange(n_directions)
        phi = np.arccos(1.0 - 2.0 * (k + 0.5) / n_directions)
        golden = np.pi * (3.0 - np.sqrt(5.0))
        axes = np.stack(
            [np.sin(phi) * np.cos(golden * k), np.sin(phi) * np.sin(golden * k), np.cos(phi)],
            axis=1,
        )
        rots = batch_rotations(self.epsilon * axes)
        mu = self._mu1(u[3:])
        p = mu + self.gain * self.normals
        pn = np.linalg.norm(p, axis=1, keepdims=True)
        t_worst = -self.delta * p / np.maximum(pn, 1e-300)   # per plane i
        best = np.full((4, 4), np.inf)
        uu = u[None, :]
        for i in range(4):
            vals = self.exact_values_batch(
                np.repeat(uu, n_directions, axis=0), rots, np.repeat(t_worst[i][None, :], n_directions, axis=0)
            ).reshape(n_directions, 4, 4)
            best[i] = np.minimum(best[i], vals[:, i, :].min(axis=0))
        return best.reshape(-1)


def theta_lower_bounds(
    robust: RobustCamera,
    corners: np.ndarray,
    extrinsics: RigidTransform,
    gain: float,
) -> ThetaBounds:
    """Convenience constructor mirroring visibility_constraint_rows."""
    return ThetaBounds(robust, corners, extrinsics, gain)


def verify_theta_bounds(
    camera: CameraModel,
    bounds: ErrorBounds,
    gain: float,
    n_draws: int = 100_000,
    seed: int = 0,
    sweep_directions: int = 64,
) -> tuple[VerificationReport, float]:
    """Soundness sampling for ThetaBounds.

    Draws random (state, twist, admissible error) tuples and checks
    Theta-tilde(u) <= Theta(u) + 1e-9 on every row.  Returns the report
    (worst_margin = min over draws of Theta - Theta-tilde, violations
    counted at < -1e-9) together with the largest tightness gap measured by
    the brute-force rotation sweep on a subsample of draws.
    """
    rng = np.random.default_rng(seed)
    rob = robust_camera(camera, bounds)
    geoms = max(1, round(n_draws / 200))
    per_geom = int(np.ceil(n_draws / geoms))
    violations = 0
    samples = 0
    worst = np.inf
    max_gap = 0.0
    sweep_every = max(1, geoms // 25)
    scale = np.array([0.5, 0.5, 0.5, 1.0, 1.0, 1.0])
    for g in range(geoms):
        tb = _random_theta_state(rng, rob, gain)
        u = rng.normal(size=(per_geom, 6)) * scale
        rots, trans = sample_errors(rng, bounds, per_geom)
        margin = tb.exact_values_batch(u, rots, trans) - tb.values_batch(u)
        worst = min(worst, float(margin.min()))
        violations += int(np.count_nonzero(margin < -1e-9))
        samples += margin.size
        if g % sweep_every == 0:
            gap = tb.sweep_lower(u[0], sweep_directions) - tb.values(u[0])
            max_gap = max(max_gap, float(gap.max()))
    return (
        VerificationReport(violations=violations, samples=samples, worst_margin=worst, seed=seed),
        max_gap,
    )


def _random_theta_state(rng: np.random.Generator, rob: RobustCamera, gain: float) -> ThetaBounds:
    """Random believable geometry: marker near the FOV, mild extrinsics."""
    kinv = np.linalg.inv(rob.base.matrix)
    depth = 0.15 + 1.85 * rng.random()
    px = np.array([rob.base.width, rob.base.length]) * (0.2 + 0.6 * rng.random(2))
    center = (kinv @ np.array([px[0], px[1], 1.0])) * depth
    side = 0.05 + 0.15 * rng.random()
    rot = rotation_from_vector(random_rotation_vector(rng, np.pi))
    offsets = side * np.array(
        [[-0.5, 0.5, 0.0], [0.5, 0.5, 0.0], [0.5, -0.5, 0.0], [-0.5, -0.5, 0.0]]
    )
    corners = center[None, :] + offsets @ rot.T
    ext = RigidTransform(
        rotation_from_vector(random_rotation_vector(rng, 0.3)),
        0.15 * rng.normal(size=3),
    )
    return ThetaBounds(rob, corners, ext, gain)
