import numpy as np
from ..base import BaseEnsemble


class Pixweightedavg(BaseEnsemble):
    """
    Max-proportional weighting evaluated per pixel instead of per map:

        w_i(p) = m_i(p) / sum_j m_j(p),   fused(p) = sum_i w_i(p) m_i(p)

    Pixels where every map is zero stay zero.
    """

    def combine(self, stack: np.ndarray) -> np.ndarray:
        total = stack.sum(axis=0)
        safe = np.where(total > 0, total, 1.0)
        return np.where(total > 0, np.sum(stack ** 2, axis=0) / safe, 0.0)
