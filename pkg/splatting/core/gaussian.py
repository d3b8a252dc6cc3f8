"""
Gaussian Module
---------------
3D Gaussian primitives and the scene that holds them.

A Scene stores its Gaussians as parallel arrays (one row per Gaussian) so
projection and compositing can run vectorized; `Scene.gaussians` gives the
per-Gaussian view as Gaussian3D records.

Covariances are kept factored as (scale, unit quaternion), which makes
Sigma = R S S^T R^T symmetric positive definite by construction.
"""

import hashlib
from dataclasses import dataclass

import numpy as np

# f32 storage cannot hold a unit quaternion to 1e-9
QUATERNION_TOL = 1e-6


def quaternion_to_rotation(q: np.ndarray) -> np.ndarray:
    """
    Convert (w, x, y, z) quaternions to rotation matrices.

    Parameters:
        q (np.ndarray): Quaternion of shape (4,) or (G, 4). Normalized here.

    Returns:
        np.ndarray: Rotation of shape (3, 3) or (G, 3, 3)
    """
    q = np.asarray(q, dtype=np.float64)
    single = q.ndim == 1
    q = np.atleast_2d(q)
    q = q / np.linalg.norm(q, axis=1, keepdims=True)
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]

    R = np.empty((q.shape[0], 3, 3))
    R[:, 0, 0] = 1 - 2 * (y * y + z * z)
    R[:, 0, 1] = 2 * (x * y - w * z)
    R[:, 0, 2] = 2 * (x * z + w * y)
    R[:, 1, 0] = 2 * (x * y + w * z)
    R[:, 1, 1] = 1 - 2 * (x * x + z * z)
    R[:, 1, 2] = 2 * (y * z - w * x)
    R[:, 2, 0] = 2 * (x * z - w * y)
    R[:, 2, 1] = 2 * (y * z + w * x)
    R[:, 2, 2] = 1 - 2 * (x * x + y * y)

    return R[0] if single else R


def covariance_3d(scales: np.ndarray, rotations: np.ndarray) -> np.ndarray:
    """
    Build Sigma = R S S^T R^T from scale vectors and quaternions.

    Parameters:
        scales (np.ndarray): (3,) or (G, 3) positive scales
        rotations (np.ndarray): (4,) or (G, 4) quaternions

    Returns:
        np.ndarray: (3, 3) or (G, 3, 3) covariance matrices
    """
    R = quaternion_to_rotation(rotations)
    M = R * np.asarray(scales, dtype=np.float64)[..., np.newaxis, :]
    return M @ np.swapaxes(M, -1, -2)


@dataclass(frozen=True)
class Gaussian3D:
    """
    A single anisotropic 3D Gaussian.

    lang_features holds N slots of C-dim compressed language features:
    novel-appearance slots first, the self-appearance slot last.
    """
    position: np.ndarray
    scale: np.ndarray
    rotation: np.ndarray
    opacity: float
    base_color: np.ndarray
    class_id: int
    lang_features: np.ndarray

    def __post_init__(self):
        for name in ("position", "scale", "rotation", "base_color", "lang_features"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        _validate_rows(self.position[None], self.scale[None], self.rotation[None],
                       np.array([self.opacity], dtype=np.float64), self.base_color[None],
                       self.lang_features[None])

    @property
    def covariance(self) -> np.ndarray:
        return covariance_3d(self.scale, self.rotation)


@dataclass(frozen=True)
class Scene:
    """
    Ordered collection of Gaussians sharing N language slots of width C.

    Parameters:
        positions (np.ndarray): (G, 3) means
        scales (np.ndarray): (G, 3) positive scales
        rotations (np.ndarray): (G, 4) unit quaternions (w, x, y, z)
        opacities (np.ndarray): (G,) opacities in (0, 1]
        base_colors (np.ndarray): (G, 3) colors in [0, 1]
        class_ids (np.ndarray): (G,) integer labels
        lang_features (np.ndarray): (G, N, C) language slots
        appearance_dim (int): d_a
        feature_dim_high (int): D
    """
    positions: np.ndarray
    scales: np.ndarray
    rotations: np.ndarray
    opacities: np.ndarray
    base_colors: np.ndarray
    class_ids: np.ndarray
    lang_features: np.ndarray
    appearance_dim: int
    feature_dim_high: int

    def __post_init__(self):
        arrays = {
            "positions": np.array(self.positions, dtype=np.float64).reshape(-1, 3),
            "scales": np.array(self.scales, dtype=np.float64).reshape(-1, 3),
            "rotations": np.array(self.rotations, dtype=np.float64).reshape(-1, 4),
            "opacities": np.array(self.opacities, dtype=np.float64).reshape(-1),
            "base_colors": np.array(self.base_colors, dtype=np.float64).reshape(-1, 3),
            "class_ids": np.array(self.class_ids, dtype=np.int64).reshape(-1),
        }
        lang = np.array(self.lang_features, dtype=np.float64)
        if lang.ndim != 3:
            raise ValueError(f"lang_features must have shape (G, N, C), got {lang.shape}")
        arrays["lang_features"] = lang

        count = arrays["positions"].shape[0]
        for name, arr in arrays.items():
            if arr.shape[0] != count:
                raise ValueError(f"'{name}' has {arr.shape[0]} rows, expected {count}")

        _validate_rows(arrays["positions"], arrays["scales"], arrays["rotations"],
                       arrays["opacities"], arrays["base_colors"], lang)

        if lang.shape[1] < 1 or lang.shape[2] < 1:
            raise ValueError(f"Need at least one slot of width >= 1, got {lang.shape[1:]}")
        if self.feature_dim_high < lang.shape[2]:
            raise ValueError(f"D ({self.feature_dim_high}) must be >= C ({lang.shape[2]})")
        if self.appearance_dim < 1:
            raise ValueError(f"appearance_dim must be positive, got {self.appearance_dim}")

        for name, arr in arrays.items():
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def __len__(self):
        return self.positions.shape[0]

    @property
    def num_appearance_slots(self) -> int:
        return self.lang_features.shape[1]

    @property
    def feature_dim_low(self) -> int:
        return self.lang_features.shape[2]

    def gaussian(self, k: int) -> Gaussian3D:
        return Gaussian3D(
            position=self.positions[k],
            scale=self.scales[k],
            rotation=self.rotations[k],
            opacity=float(self.opacities[k]),
            base_color=self.base_colors[k],
            class_id=int(self.class_ids[k]),
            lang_features=self.lang_features[k],
        )

    @property
    def gaussians(self) -> list:
        return [self.gaussian(k) for k in range(len(self))]

    @classmethod
    def from_gaussians(cls, gaussians: list, appearance_dim: int, feature_dim_high: int,
                       num_slots: int = None, feature_dim_low: int = None) -> "Scene":
        """
        Assemble a scene from Gaussian3D records.

        num_slots / feature_dim_low are only needed for an empty list.
        """
        if gaussians:
            lang = np.stack([g.lang_features for g in gaussians])
        else:
            if num_slots is None or feature_dim_low is None:
                raise ValueError("Empty scene needs explicit num_slots and feature_dim_low")
            lang = np.zeros((0, num_slots, feature_dim_low))

        return cls(
            positions=np.array([g.position for g in gaussians]).reshape(-1, 3),
            scales=np.array([g.scale for g in gaussians]).reshape(-1, 3),
            rotations=np.array([g.rotation for g in gaussians]).reshape(-1, 4),
            opacities=np.array([g.opacity for g in gaussians]),
            base_colors=np.array([g.base_color for g in gaussians]).reshape(-1, 3),
            class_ids=np.array([g.class_id for g in gaussians], dtype=np.int64),
            lang_features=lang,
            appearance_dim=appearance_dim,
            feature_dim_high=feature_dim_high,
        )

    def with_lang_features(self, lang_features: np.ndarray) -> "Scene":
        """
        Return a copy with new language slots; every other field is shared.
        """
        lang_features = np.asarray(lang_features, dtype=np.float64)
        if lang_features.shape[0] != len(self):
            raise ValueError(f"Expected {len(self)} rows of lang_features, got {lang_features.shape[0]}")
        return Scene(self.positions, self.scales, self.rotations, self.opacities,
                     self.base_colors, self.class_ids, lang_features.copy(),
                     self.appearance_dim, self.feature_dim_high)

    def covariances(self) -> np.ndarray:
        return covariance_3d(self.scales, self.rotations)

    def geometry_digest(self) -> str:
        """
        Hash of every field except the language slots.
        """
        h = hashlib.sha256()
        for arr in (self.positions, self.scales, self.rotations, self.opacities,
                    self.base_colors, self.class_ids):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


def _validate_rows(positions, scales, rotations, opacities, colors, lang):
    """
    Validates per-Gaussian invariants on stacked arrays.
    """
    for name, arr in (("position", positions), ("scale", scales), ("rotation", rotations),
                      ("opacity", opacities), ("base_color", colors), ("lang_features", lang)):
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"Non-finite values in '{name}'")

    if positions.shape[-1:] != (3,) or scales.shape[-1:] != (3,) or colors.shape[-1:] != (3,):
        raise ValueError("position, scale and base_color must be 3-vectors")
    if rotations.shape[-1:] != (4,):
        raise ValueError("rotation must be a quaternion (w, x, y, z)")

    if np.any(scales <= 0):
        raise ValueError("scale components must be > 0")
    if rotations.size and np.any(np.abs(np.linalg.norm(rotations, axis=-1) - 1.0) > QUATERNION_TOL):
        raise ValueError(f"rotation quaternions must have unit norm (tolerance {QUATERNION_TOL})")
    if np.any(opacities <= 0) or np.any(opacities > 1):
        raise ValueError("opacity must be in (0, 1]")
    if np.any(colors < 0) or np.any(colors > 1):
        raise ValueError("base_color must be in [0, 1]")
