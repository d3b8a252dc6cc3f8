import numpy as np
from ..base import BaseEnsemble


class Pixmax(BaseEnsemble):
    """
    Per-pixel maximum over the maps.
    """

    def combine(self, stack: np.ndarray) -> np.ndarray:
        return stack.max(axis=0)
