import numpy as np
import pytest

from fovsafe.camera import Intrinsics, camera_model, unit_camera
from fovsafe.se3 import RigidTransform, random_rotation_vector, rotation_from_vector


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def unit_cam():
    return unit_camera()


@pytest.fixture
def vga_cam():
    return camera_model(Intrinsics(600.0, 600.0, 320.0, 240.0), 640.0, 480.0)


def random_transform(rng, max_angle=np.pi - 0.2, span=1.0) -> RigidTransform:
    return RigidTransform(
        rotation_from_vector(random_rotation_vector(rng, max_angle)),
        rng.uniform(-span, span, 3),
    )
