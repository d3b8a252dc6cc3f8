import numpy as np
from ..base import BaseEnsemble


class Weighted(BaseEnsemble):
    """
    Convex fusion weighted by each map's global maximum:

        w_i = max(m_i) / sum_j max(m_j),   fused = sum_i w_i m_i

    All-zero maps get uniform weights.
    """

    def weights(self, stack: np.ndarray) -> np.ndarray:
        peaks = stack.reshape(stack.shape[0], -1).max(axis=1)
        total = peaks.sum()
        if total <= 0:
            return np.full(stack.shape[0], 1.0 / stack.shape[0])
        return peaks / total

    def combine(self, stack: np.ndarray) -> np.ndarray:
        return np.tensordot(self.weights(stack), stack, axes=1)
