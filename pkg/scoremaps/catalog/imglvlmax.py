import numpy as np
from ..base import BaseEnsemble


class Imglvlmax(BaseEnsemble):
    """
    Keep the single map with the largest global maximum (ties to the lowest slot).
    """

    def combine(self, stack: np.ndarray) -> np.ndarray:
        peaks = stack.reshape(stack.shape[0], -1).max(axis=1)
        return stack[int(np.argmax(peaks))].copy()
