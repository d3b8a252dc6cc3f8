import numpy as np
from ..base import BaseEnsemble


class Pixavg(BaseEnsemble):
    """
    Per-pixel mean over the maps.
    """

    def combine(self, stack: np.ndarray) -> np.ndarray:
        return stack.mean(axis=0)
