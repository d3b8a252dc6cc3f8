"""
BoxSmoother Module
------------------
Mean filter for score maps.

Pads the map by repeating its edge values, then averages every
kernel x kernel window with a sliding window view. For an even kernel the
window around pixel p covers [p - k/2, p + k/2 - 1], so kernel 20 reaches 10
pixels back and 9 forward.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..relevancy import ScoreMap


class BoxSmoother:
    """
    Uniform box mean with clamp-to-edge padding that keeps the map size.
    """

    def __init__(self, kernel: int = 20):
        """
        Parameters:
            kernel (int): Window height and width, >= 1
        """
        if not isinstance(kernel, int) or isinstance(kernel, bool) or kernel < 1:
            raise ValueError(f"kernel must be a positive int, got {kernel}")
        self.kernel = kernel
        self.pad_before = kernel // 2
        self.pad_after = kernel - 1 - self.pad_before

    def apply(self, values: np.ndarray) -> np.ndarray:
        """
        Smooth an (H, W) array.

        Raises:
            ValueError when the kernel is larger than the map
        """
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError(f"Expected an (H, W) map, got shape {values.shape}")
        H, W = values.shape
        if self.kernel > H or self.kernel > W:
            raise ValueError(f"Kernel {self.kernel} is larger than the {H}x{W} map")
        if self.kernel == 1:
            return values.copy()

        padded = np.pad(values, ((self.pad_before, self.pad_after), (self.pad_before, self.pad_after)), mode="edge")
        windows = sliding_window_view(padded, window_shape=(self.kernel, self.kernel))
        return windows.mean(axis=(2, 3))

    def smooth(self, score_map: ScoreMap) -> ScoreMap:
        return ScoreMap(np.clip(self.apply(score_map.values), 0.0, 1.0),
                        score_map.label, score_map.slot, score_map.level)
