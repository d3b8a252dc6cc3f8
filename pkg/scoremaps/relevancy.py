"""
Relevancy Module
----------------
Contrastive relevancy of decoded language features against a text query.

For a decoded feature F, query q and canonical phrases c_j:

    score(F) = min_j exp(q.F) / (exp(q.F) + exp(c_j.F))

The background filter scores the "sky" and "background" texts with the
actual query as their only canonical phrase and inverts the stronger one.
"""

from dataclasses import dataclass
from typing import Union

import numpy as np

from splatting.raster.feature_map import FeatureMap
from wildscene.oracle import CANONICAL_TEXTS, QueryEmbedding

FUSED = "fused"


@dataclass(frozen=True)
class CanonicalSet:
    """
    Parameters:
        queries (tuple[QueryEmbedding]): Contrast phrases, by default
            "object", "things", "scene", "sky" and "building"
    """
    queries: tuple

    def __post_init__(self):
        object.__setattr__(self, "queries", tuple(self.queries))
        if not self.queries:
            raise ValueError("Canonical set must not be empty")
        if len({q.dim for q in self.queries}) != 1:
            raise ValueError("Canonical embeddings must share one width")

    @classmethod
    def from_oracle(cls, oracle, texts=CANONICAL_TEXTS) -> "CanonicalSet":
        return cls(tuple(oracle.query(t) for t in texts))

    def matrix(self) -> np.ndarray:
        return np.stack([q.vector for q in self.queries])


@dataclass(frozen=True)
class ScoreMap:
    """
    Parameters:
        values (np.ndarray): (H, W) scores in [0, 1]
        label (str): Query text
        slot (int or str): Appearance slot, or "fused"
        level (int): Semantic level
    """
    values: np.ndarray
    label: str = ""
    slot: Union[int, str] = FUSED
    level: int = 0

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError(f"Score map must be (H, W), got {values.shape}")
        if not np.all(np.isfinite(values)) or np.any(values < 0) or np.any(values > 1):
            raise ValueError(f"Score map '{self.label}' must hold finite values in [0, 1]")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> tuple:
        return self.values.shape

    def max(self) -> float:
        return float(self.values.max())


def _features(decoded: Union[FeatureMap, np.ndarray]) -> np.ndarray:
    values = decoded.values if isinstance(decoded, FeatureMap) else np.asarray(decoded)
    if values.ndim not in (1, 2, 3):
        raise ValueError(f"Decoded features must be (D,), (M, D) or (H, W, D), got {values.shape}")
    return values.astype(np.float64)


def _pairwise(query_dots: np.ndarray, contrast_dots: np.ndarray) -> np.ndarray:
    # exp(a) / (exp(a) + exp(b)) == 1 / (1 + exp(b - a))
    return 1.0 / (1.0 + np.exp(contrast_dots - query_dots))


def relevancy_scalar(features: np.ndarray, q: QueryEmbedding, canon: CanonicalSet) -> np.ndarray:
    """
    Relevancy of one or more raw features: (..., D) -> (...).
    """
    F = _features(features)
    if F.shape[-1] != q.dim:
        raise ValueError(f"Features have width {F.shape[-1]}, query has {q.dim}")
    query_dots = F @ q.vector
    contrast = F @ canon.matrix().T
    return np.min(_pairwise(query_dots[..., np.newaxis], contrast), axis=-1)


def relevancy_map(decoded: Union[FeatureMap, np.ndarray], q: QueryEmbedding, canon: CanonicalSet,
                  slot: Union[int, str] = FUSED, level: int = 0) -> ScoreMap:
    """
    Per-pixel relevancy of an (H, W, D) decoded feature map.

    Parameters:
        decoded (FeatureMap or np.ndarray): Decoded features
        q (QueryEmbedding): Query
        canon (CanonicalSet): Contrast phrases
        slot (int or str): Slot tag of the result

    Returns:
        ScoreMap
    """
    F = _features(decoded)
    if F.ndim != 3:
        raise ValueError(f"relevancy_map expects (H, W, D) features, got {F.shape}")
    return ScoreMap(relevancy_scalar(F, q, canon), q.label, slot, level)


def background_score(decoded: Union[FeatureMap, np.ndarray], q: QueryEmbedding,
                     background_queries: list, level: int = 0) -> ScoreMap:
    """
    1 - max_b relevancy(F, b, {q}) over the background texts b.

    High values mean the pixel looks more like the query than like background.
    """
    if not background_queries:
        raise ValueError("At least one background query is required")
    F = _features(decoded)
    contrast = CanonicalSet((q,))
    strongest = np.max([relevancy_scalar(F, b, contrast) for b in background_queries], axis=0)
    return ScoreMap(1.0 - strongest, f"background|{q.label}", FUSED, level)
