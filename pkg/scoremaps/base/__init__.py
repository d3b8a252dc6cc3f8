"""
scoremaps.base
--------------
Ensemble abstraction and score-map smoothing.
"""

from .base_ensemble import BaseEnsemble
from .box_smoother import BoxSmoother

__all__ = ["BaseEnsemble", "BoxSmoother"]
