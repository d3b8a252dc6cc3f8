"""
Appearance Module
-----------------
Appearance embeddings, the appearance-conditioned color map and the
selection of novel appearances for multi-appearance rendering.

Color under appearance l:

    c_l = clamp(c * a(l) + b(l), 0, 1),   a(l) = 1 + A l,   b(l) = B l

A and B are fixed seeded 3 x d_a matrices, so the zero embedding is the
identity appearance.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from splatting.core.gaussian import Gaussian3D

from .seeding import as_f32, rng_for

APPEARANCE_MAP_SEED = 0x5EED
GAIN_SCALE = 0.25
BIAS_SCALE = 0.15


class InsufficientCandidatesError(ValueError):
    """
    Raised when fewer views than requested satisfy the selection constraints.
    """

    def __init__(self, qualified: int, needed: int):
        self.qualified = qualified
        self.needed = needed
        super().__init__(f"Only {qualified} candidate appearance(s) qualified, {needed} needed")


@dataclass(frozen=True)
class AppearanceEmbedding:
    """
    d_a-dim latent identifying an illumination / filter state.
    """
    vector: np.ndarray

    def __post_init__(self):
        vector = np.array(self.vector, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(vector)):
            raise ValueError("Appearance embedding must be finite")
        vector.flags.writeable = False
        object.__setattr__(self, "vector", vector)

    @property
    def dim(self) -> int:
        return self.vector.shape[0]

    def key(self) -> bytes:
        """
        Bytes identifying this embedding (used to seed oracle noise).
        """
        return self.vector.astype("<f8").tobytes()

    @classmethod
    def zeros(cls, dim: int) -> "AppearanceEmbedding":
        return cls(np.zeros(dim))

    @classmethod
    def random(cls, dim: int, rng: np.random.Generator) -> "AppearanceEmbedding":
        return cls(as_f32(rng.standard_normal(dim)))


@lru_cache(maxsize=None)
def appearance_map(dim: int) -> tuple:
    """
    Fixed (A, B) matrices of the appearance color map for width d_a.
    """
    rng = rng_for(APPEARANCE_MAP_SEED, "appearance-map", dim)
    A = rng.standard_normal((3, dim)) * GAIN_SCALE / np.sqrt(dim)
    B = rng.standard_normal((3, dim)) * BIAS_SCALE / np.sqrt(dim)
    A.flags.writeable = False
    B.flags.writeable = False
    return A, B


def appearance_colors(base_colors: np.ndarray, l: AppearanceEmbedding, appearance_dim: int) -> np.ndarray:
    """
    Vectorized apply_appearance over (G, 3) base colors.
    """
    if l.dim != appearance_dim:
        raise ValueError(f"Appearance embedding has width {l.dim}, scene expects {appearance_dim}")
    A, B = appearance_map(appearance_dim)
    gain = 1.0 + A @ l.vector
    bias = B @ l.vector
    return np.clip(np.asarray(base_colors, dtype=np.float64) * gain + bias, 0.0, 1.0)


def apply_appearance(g: Gaussian3D, l: AppearanceEmbedding, appearance_dim: int = None) -> np.ndarray:
    """
    Appearance-specific color of one Gaussian.

    Parameters:
        g (Gaussian3D): Gaussian whose base color is conditioned
        l (AppearanceEmbedding): Appearance
        appearance_dim (int): Scene d_a (defaults to the embedding width)

    Returns:
        np.ndarray: RGB in [0, 1]
    """
    dim = l.dim if appearance_dim is None else appearance_dim
    return appearance_colors(g.base_color[np.newaxis], l, dim)[0]


def manhattan(a: AppearanceEmbedding, b: AppearanceEmbedding) -> float:
    return float(np.sum(np.abs(a.vector - b.vector)))


def select_novel_views(quality_errors: list, embeddings: list, count: int,
                       eps_q: float, eps_d: float) -> list:
    """
    Greedy selection of view indices for novel appearances.

    Candidates are scanned in ascending view index; a candidate is taken when
    its self-render error is below eps_q and its Manhattan distance to every
    already taken embedding exceeds eps_d.

    Parameters:
        quality_errors (list[float]): Self-render mean L1 error per view
        embeddings (list[AppearanceEmbedding]): Embedding per view
        count (int): N - 1
        eps_q (float): Rendering quality bound
        eps_d (float): Embedding distance bound

    Returns:
        list[int]: Chosen view indices

    Raises:
        InsufficientCandidatesError when fewer than `count` qualify
    """
    if count < 0:
        raise ValueError(f"count must be non-negative, got {count}")
    if len(quality_errors) != len(embeddings):
        raise ValueError("quality_errors and embeddings must align")

    chosen = []
    for idx, (err, emb) in enumerate(zip(quality_errors, embeddings)):
        if len(chosen) == count:
            break
        if not err < eps_q:
            continue
        if all(manhattan(emb, embeddings[j]) > eps_d for j in chosen):
            chosen.append(idx)

    if len(chosen) < count:
        raise InsufficientCandidatesError(len(chosen), count)

    for a in chosen:
        if not quality_errors[a] < eps_q:
            raise RuntimeError(f"Selected view {a} violates the quality bound")
        for b in chosen:
            if a < b and not manhattan(embeddings[a], embeddings[b]) > eps_d:
                raise RuntimeError(f"Selected views {a}, {b} violate the distance bound")
    return chosen
