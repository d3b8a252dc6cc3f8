"""
Shared fixtures: small seeded scenes, cameras, oracles and a hand-built
identity autoencoder.
"""

import json

import numpy as np
import pytest

from langfield.autoencoder import MlpParams
from splatting.core.camera import Camera
from splatting.core.gaussian import Scene
from wildscene.seeding import as_f32
from wildscene.spec import SceneSpec


def random_scene(seed: int, count: int = 8, num_slots: int = 1, dim: int = 3,
                 appearance_dim: int = 4, feature_dim_high: int = 16) -> Scene:
    """
    Gaussians scattered around the origin with random language slots.
    """
    rng = np.random.default_rng(seed)
    rotations = rng.standard_normal((count, 4))
    rotations /= np.linalg.norm(rotations, axis=1, keepdims=True)
    return Scene(
        positions=as_f32(rng.uniform(-1.0, 1.0, (count, 3))),
        scales=as_f32(rng.uniform(0.15, 0.4, (count, 3))),
        rotations=as_f32(rotations),
        opacities=as_f32(rng.uniform(0.3, 0.95, count)),
        base_colors=as_f32(rng.uniform(0.0, 1.0, (count, 3))),
        class_ids=rng.integers(0, 3, count),
        lang_features=as_f32(rng.standard_normal((count, num_slots, dim))),
        appearance_dim=appearance_dim,
        feature_dim_high=feature_dim_high,
    )


def front_camera(size: int = 16, focal: float = 16.0) -> Camera:
    """
    Camera 5 units down -y looking at the origin, z up.
    """
    return Camera.look_at((0.0, -5.0, 0.0), (0.0, 0.0, 0.0), (size, size), focal)


def identity_params(dim: int) -> MlpParams:
    """
    dim -> dim -> dim autoencoder that reproduces its input exactly.

    Each block splits x into (x, -x) through the leaky rectifier and
    recombines: leaky(x) - leaky(-x) = 1.01 x.
    """
    eye = np.eye(dim)
    split = np.concatenate([eye, -eye], axis=1)
    merge = np.concatenate([eye, -eye], axis=0) / 1.01
    weights = [split, merge, split.copy(), merge.copy()]
    biases = [np.zeros(2 * dim), np.zeros(dim), np.zeros(2 * dim), np.zeros(dim)]
    return MlpParams(weights, biases, encoder_layers=2)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def camera():
    return front_camera()


@pytest.fixture
def small_scene():
    return random_scene(3)


@pytest.fixture
def tiny_spec():
    return SceneSpec(seed=1, num_gaussians=40, classes=["arch", "column"], views=3,
                     height=32, width=32, D=16, C=3, N=2, sigma_a=0.1)


@pytest.fixture
def transient_spec():
    return SceneSpec(seed=2, num_gaussians=40, classes=["arch", "column"], views=4,
                     height=32, width=32, D=16, C=3, N=2, sigma_a=0.0,
                     transient_rate=1.0, max_transients=1)


SMOKE = {
    "seed": 3,
    "num_gaussians": 40,
    "classes": ["arch", "column"],
    "views": 3,
    "height": 32,
    "width": 32,
    "D": 16,
    "C": 3,
    "N": 2,
    "sigma_a": 0.1,
    "ae_epochs": 2,
    "ae_learning_rate": 0.001,
    "ae_hidden": [8],
    "ae_pixel_stride": 2,
    "field_iterations": 20,
    "smooth_kernel": 1,
}


@pytest.fixture
def smoke_config_path(tmp_path):
    """
    Writes a tiny pipeline config whose outputs go under tmp_path/out.
    """
    data = dict(SMOKE, out=str(tmp_path / "out"))
    path = tmp_path / "smoke.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return path
