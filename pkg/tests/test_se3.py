import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.linalg import expm
from scipy.spatial.transform import Rotation

from fovsafe.se3 import (
    RigidTransform,
    random_in_ball,
    random_rotation_vector,
    rotation_from_vector,
    rotation_to_vector,
    skew,
    twist_exponential,
)

from conftest import random_transform


def test_skew_zero_and_canonical_basis():
    assert_allclose(skew(np.zeros(3)), np.zeros((3, 3)))
    assert_allclose(skew(np.array([0.0, 0.0, 1.0])), [[0, -1, 0], [1, 0, 0], [0, 0, 0]])


def test_skew_matches_cross_product(rng):
    for _ in range(100):
        v, w = rng.normal(size=3), rng.normal(size=3)
        assert_allclose(skew(v) @ w, np.cross(v, w), atol=1e-12)
        assert_allclose(skew(v).T, -skew(v))


def test_rotation_from_vector_identity_and_hand_value():
    assert_allclose(rotation_from_vector(np.zeros(3)), np.eye(3))
    r = rotation_from_vector(np.array([0.0, 0.0, np.pi / 2]))
    assert_allclose(r @ np.array([1.0, 0.0, 0.0]), [0.0, 1.0, 0.0], atol=1e-12)


def test_rotation_from_vector_matches_reference(rng):
    for _ in range(200):
        rv = random_rotation_vector(rng, np.pi)
        r = rotation_from_vector(rv)
        assert_allclose(r, Rotation.from_rotvec(rv).as_matrix(), atol=1e-12)
        assert_allclose(r @ r.T, np.eye(3), atol=1e-9)
        assert_allclose(np.linalg.det(r), 1.0, atol=1e-9)


def test_rotation_round_trip(rng):
    for _ in range(100):
        rv = random_rotation_vector(rng, np.pi - 1e-6)
        assert_allclose(rotation_to_vector(rotation_from_vector(rv)), rv, atol=1e-9)


def test_rotation_to_vector_hand_cases():
    assert_allclose(rotation_to_vector(np.eye(3)), np.zeros(3))
    rv = rotation_to_vector(rotation_from_vector(np.array([0.0, 0.0, np.pi / 2])))
    assert_allclose(rv, [0.0, 0.0, np.pi / 2], atol=1e-12)


def test_rotation_to_vector_small_angle(rng):
    for theta in (1e-9, 1e-7, 1e-5):
        axis = np.array([1.0, -2.0, 2.0]) / 3.0
        rv = rotation_to_vector(rotation_from_vector(theta * axis))
        assert_allclose(rv, theta * axis, rtol=1e-6, atol=1e-16)


def test_rotation_to_vector_near_pi(rng):
    # axis recovered against the eigenvector of R for eigenvalue 1
    rv = rotation_to_vector(rotation_from_vector(np.array([np.pi, 0.0, 0.0])))
    assert_allclose(np.linalg.norm(rv), np.pi, atol=1e-9)
    assert_allclose(np.abs(rv / np.pi), [1.0, 0.0, 0.0], atol=1e-9)
    for _ in range(50):
        axis = random_rotation_vector(rng, np.pi, on_boundary=True) / np.pi
        r = rotation_from_vector(np.pi * axis)
        rv, near_pi = rotation_to_vector(r, with_ambiguity=True)
        assert near_pi
        assert_allclose(np.linalg.norm(rv), np.pi, atol=1e-9)
        vals, vecs = np.linalg.eig(r)
        fixed = np.real(vecs[:, np.argmin(np.abs(vals - 1.0))])
        cos = abs(np.dot(rv / np.pi, fixed))
        assert_allclose(cos, 1.0, atol=1e-6)
        # deterministic sign: the largest-magnitude axis component is positive
        largest = np.argmax(np.abs(rv))
        assert rv[largest] > 0.0
    _, flag = rotation_to_vector(rotation_from_vector(np.array([0.5, 0.0, 0.0])), with_ambiguity=True)
    assert not flag


def test_compose_inverse_and_identity(rng):
    for _ in range(50):
        a = random_transform(rng)
        ident = a @ a.inverse()
        assert_allclose(ident.rotation, np.eye(3), atol=1e-9)
        assert_allclose(ident.translation, np.zeros(3), atol=1e-9)
        inv = a.inverse()
        assert_allclose(inv.rotation, a.rotation.T)
        assert_allclose(inv.translation, -a.rotation.T @ a.translation)
        t = RigidTransform.identity() @ a
        assert_allclose(t.rotation, a.rotation)
        assert_allclose(t.translation, a.translation)


def test_compose_associative(rng):
    for _ in range(50):
        a, b, c = (random_transform(rng) for _ in range(3))
        left = (a @ b) @ c
        right = a @ (b @ c)
        assert_allclose(left.rotation, right.rotation, atol=1e-9)
        assert_allclose(left.translation, right.translation, atol=1e-9)


def test_transform_point_hand_value():
    t = RigidTransform(
        rotation_from_vector(np.array([0.0, 0.0, np.pi / 2])), np.array([1.0, 0.0, 0.0])
    )
    assert_allclose(t.apply(np.array([1.0, 0.0, 0.0])), [1.0, 1.0, 0.0], atol=1e-12)


def test_apply_batch_matches_single(rng):
    t = random_transform(rng)
    pts = rng.normal(size=(8, 3))
    batch = t.apply(pts)
    for k in range(8):
        assert_allclose(batch[k], t.apply(pts[k]))


def test_from_rotvec_and_rotvec_round_trip(rng):
    rv = random_rotation_vector(rng, 2.0)
    t = RigidTransform.from_rotvec(rv, np.array([0.1, 0.2, 0.3]))
    assert_allclose(t.rotvec(), rv, atol=1e-9)


def _twist_matrix(v, w):
    m = np.zeros((4, 4))
    m[:3, :3] = skew(w)
    m[:3, 3] = v
    return m


def test_twist_exponential_matches_matrix_exponential(rng):
    for _ in range(100):
        v = rng.normal(size=3)
        w = rng.normal(size=3)
        dt = rng.uniform(0.01, 2.0)
        ref = expm(_twist_matrix(v, w) * dt)
        out = twist_exponential(v, w, dt)
        assert_allclose(out.rotation, ref[:3, :3], atol=1e-9)
        assert_allclose(out.translation, ref[:3, 3], atol=1e-9)


def test_twist_exponential_pure_cases():
    out = twist_exponential(np.array([1.0, 0.0, 0.0]), np.zeros(3), 0.1)
    assert_allclose(out.rotation, np.eye(3))
    assert_allclose(out.translation, [0.1, 0.0, 0.0])
    out = twist_exponential(np.zeros(3), np.array([0.0, 0.0, np.pi]), 1.0)
    assert_allclose(rotation_to_vector(out.rotation), [0.0, 0.0, np.pi], atol=1e-12)
    assert_allclose(out.translation, np.zeros(3))


def test_twist_exponential_small_angle_series(rng):
    v = np.array([0.3, -0.1, 0.2])
    w = np.array([1e-9, -2e-9, 1e-9])
    ref = expm(_twist_matrix(v, w))
    out = twist_exponential(v, w, 1.0)
    assert_allclose(out.rotation, ref[:3, :3], atol=1e-15)
    assert_allclose(out.translation, ref[:3, 3], atol=1e-15)


def test_step_then_unstep_returns_exactly(rng):
    for _ in range(50):
        pose = random_transform(rng)
        v, w = rng.normal(size=3), rng.normal(size=3)
        fwd = pose @ twist_exponential(v, w, 0.05)
        back = fwd @ twist_exponential(-v, -w, 0.05)
        assert_allclose(back.translation, pose.translation, atol=1e-12)
        assert_allclose(back.rotation, pose.rotation, atol=1e-12)


def test_random_samplers_respect_bounds(rng):
    for _ in range(50):
        rv = random_rotation_vector(rng, 0.3)
        assert np.linalg.norm(rv) <= 0.3 + 1e-12
        rb = random_rotation_vector(rng, 0.3, on_boundary=True)
        assert_allclose(np.linalg.norm(rb), 0.3)
        tb = random_in_ball(rng, 0.02, on_boundary=True)
        assert_allclose(np.linalg.norm(tb), 0.02)
        assert np.linalg.norm(random_in_ball(rng, 0.02)) <= 0.02 + 1e-15
