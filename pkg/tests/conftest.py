import numpy as np
import pytest

from crossproj.geometry import Camera, Intrinsics, Pose


def random_rotation(rng) -> np.ndarray:
    """Uniform-ish random rotation via QR with determinant fixed to +1."""
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 2] = -q[:, 2]
    return q


def random_camera(rng, width=64, height=48) -> Camera:
    intr = Intrinsics(
        fx=float(rng.uniform(30, 150)),
        fy=float(rng.uniform(30, 150)),
        cx=float(rng.uniform(0.3, 0.7) * (width - 1)),
        cy=float(rng.uniform(0.3, 0.7) * (height - 1)),
        width=width,
        height=height,
    )
    pose = Pose(random_rotation(rng), rng.uniform(-2, 2, size=3))
    return Camera(intr, pose)


def simple_camera(fx=100.0, fy=100.0, cx=50.0, cy=50.0, width=101, height=101,
                  pose=None) -> Camera:
    return Camera(Intrinsics(fx=fx, fy=fy, cx=cx, cy=cy, width=width, height=height),
                  pose or Pose.identity())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
