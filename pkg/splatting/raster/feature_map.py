"""
FeatureMap Module
-----------------
H x W grid of feature vectors tagged with where it came from
(e.g. "original", "self", "novel:2", "latent:self", "decoded:0").
"""

from dataclasses import dataclass

import numpy as np

from .tensor_io import load_tensor, save_tensor


@dataclass(frozen=True)
class FeatureMap:
    """
    Parameters:
        values (np.ndarray): (H, W, K) float32 features
        tag (str): Provenance tag
    """
    values: np.ndarray
    tag: str = ""

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float32)
        if values.ndim != 3:
            raise ValueError(f"FeatureMap values must be (H, W, K), got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError(f"FeatureMap '{self.tag}' contains non-finite values")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def channels(self) -> int:
        return self.values.shape[2]

    def save(self, path: str):
        save_tensor(path, self.values)

    @classmethod
    def load(cls, path: str, tag: str = "") -> "FeatureMap":
        return cls(load_tensor(path), tag)
