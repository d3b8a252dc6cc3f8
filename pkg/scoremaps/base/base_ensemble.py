"""
BaseEnsemble Module
-------------------
Defines the abstract base class for all score-map ensembles.
All ensembles inherit from this and implement the 'combine()' method.
"""

from abc import ABC, abstractmethod

import numpy as np

from ..relevancy import FUSED, ScoreMap


class BaseEnsemble(ABC):
    """
    Abstract base class for fusing the N per-appearance score maps of a query.

    This class handles stacking, shape checks and the background filter;
    subclasses only see the filtered (N, H, W) stack.
    """

    def fuse(self, maps: list, bg: ScoreMap = None) -> ScoreMap:
        """
        Filter every map by the background score and combine them.

        Parameters:
            maps (list[ScoreMap]): One map per appearance slot, self slot last
            bg (ScoreMap): Background score; None disables the filter

        Returns:
            ScoreMap: Fused map tagged "fused"
        """
        if not maps:
            raise ValueError("Ensemble needs at least one score map")
        shapes = {m.shape for m in maps}
        if len(shapes) != 1:
            raise ValueError(f"Score maps must share one shape, got {sorted(shapes)}")
        if bg is not None and bg.shape != maps[0].shape:
            raise ValueError(f"Background map {bg.shape} does not match {maps[0].shape}")

        stack = np.stack([m.values for m in maps])
        if bg is not None:
            stack = stack * bg.values
        fused = np.clip(self.combine(stack), 0.0, 1.0)
        return ScoreMap(fused, maps[0].label, FUSED, maps[0].level)

    @abstractmethod
    def combine(self, stack: np.ndarray) -> np.ndarray:
        """
        Subclasses must implement this method.

        Parameters:
            stack (np.ndarray): Background-filtered maps (N, H, W)

        Returns:
            np.ndarray: Fused map (H, W)
        """
        pass
