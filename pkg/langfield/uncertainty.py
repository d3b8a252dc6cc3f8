"""
Uncertainty Module
------------------
Appearance and transient uncertainty of language features.

    U^A(p) = 1/N * sum_n ||F^n(p) - mean_n F^n(p)||^2    over the N appearance maps
    U^T(p) = ||F^self(p) - F(p)||^2                      self render vs original photo

Squared norms sum over the feature channels. Maps of one kind are min-max
normalized jointly over the whole scene.
"""

from dataclasses import dataclass, replace

import numpy as np

from splatting.raster.feature_map import FeatureMap

APPEARANCE = "appearance"
TRANSIENT = "transient"
KINDS = (APPEARANCE, TRANSIENT)


@dataclass(frozen=True)
class UncertaintyMap:
    """
    Parameters:
        values (np.ndarray): (H, W) non-negative per-pixel uncertainty
        kind (str): "appearance" or "transient"
        normalized (bool): values are scene-normalized to [0, 1]
        level (int): Semantic level the features came from
    """
    values: np.ndarray
    kind: str
    normalized: bool = False
    level: int = 0

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError(f"Uncertainty values must be (H, W), got {values.shape}")
        if self.kind not in KINDS:
            raise ValueError(f"Unknown uncertainty kind '{self.kind}'")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValueError("Uncertainty values must be finite and non-negative")
        if self.normalized and np.any(values > 1):
            raise ValueError("Normalized uncertainty must lie in [0, 1]")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @classmethod
    def zeros(cls, shape: tuple, kind: str, level: int = 0) -> "UncertaintyMap":
        return cls(np.zeros(shape), kind, normalized=True, level=level)


def _stack(features: list) -> np.ndarray:
    values = [f.values if isinstance(f, FeatureMap) else np.asarray(f) for f in features]
    shapes = {v.shape for v in values}
    if len(shapes) != 1:
        raise ValueError(f"Feature maps must share one shape, got {sorted(shapes)}")
    return np.stack(values).astype(np.float64)


def appearance_uncertainty(features: list, level: int = 0) -> UncertaintyMap:
    """
    Per-pixel variance of the language features across appearances.

    Parameters:
        features (list[FeatureMap]): The N - 1 novel-appearance maps followed by the self map
        level (int): Semantic level

    Returns:
        UncertaintyMap: Unnormalized U^A
    """
    if len(features) < 1:
        raise ValueError("At least one feature map is required")
    stack = _stack(features)
    deviation = stack - stack.mean(axis=0)
    return UncertaintyMap(np.sum(deviation ** 2, axis=-1).mean(axis=0), APPEARANCE, level=level)


def transient_uncertainty(self_render_features: FeatureMap, original_features: FeatureMap,
                          level: int = 0) -> UncertaintyMap:
    """
    Squared feature distance between the self-appearance render and the photo.

    Returns:
        UncertaintyMap: Unnormalized U^T
    """
    stack = _stack([self_render_features, original_features])
    return UncertaintyMap(np.sum((stack[0] - stack[1]) ** 2, axis=-1), TRANSIENT, level=level)


def normalize_maps(maps: list) -> list:
    """
    Joint min-max normalization of every map of one kind.

    When all values are equal the maps normalize to 0.

    Raises:
        ValueError on an empty list or mixed kinds
    """
    if not maps:
        raise ValueError("normalize_maps needs at least one map")
    kinds = {m.kind for m in maps}
    if len(kinds) != 1:
        raise ValueError(f"Cannot normalize mixed kinds {sorted(kinds)} together")

    lo = min(float(m.values.min()) for m in maps)
    hi = max(float(m.values.max()) for m in maps)
    if hi == lo:
        return [replace(m, values=np.zeros(m.shape), normalized=True) for m in maps]
    return [replace(m, values=(m.values - lo) / (hi - lo), normalized=True) for m in maps]


def occluder_mask(u_t: UncertaintyMap, tau_u: float) -> np.ndarray:
    """
    Pixels assumed to be transient occluders: normalized U^T above tau_u.

    Raises:
        ValueError when tau_u is outside [0, 1] or the map is not normalized
    """
    if not 0.0 <= tau_u <= 1.0:
        raise ValueError(f"tau_u must be in [0, 1], got {tau_u}")
    if not u_t.normalized:
        raise ValueError("occluder_mask expects a normalized uncertainty map")
    return u_t.values > tau_u


def uncertainty_weight(u_a: UncertaintyMap = None, u_t: UncertaintyMap = None) -> np.ndarray:
    """
    Per-pixel training weight (1 - U^A) * (1 - U^T); a missing map counts as zero uncertainty.
    """
    present = [u for u in (u_a, u_t) if u is not None]
    if not present:
        raise ValueError("At least one uncertainty map is required")
    weight = np.ones(present[0].shape)
    for u in present:
        if not u.normalized:
            raise ValueError(f"{u.kind} uncertainty must be normalized before weighting")
        weight = weight * (1.0 - u.values)
    return weight
