"""
Optim Module
------------
Adaptive moment estimation over a list of numpy parameter arrays.

    m = b1 m + (1 - b1) g
    v = b2 v + (1 - b2) g^2
    theta -= lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
"""

import numpy as np


class Adam:
    """
    Adam optimizer updating float64 arrays in place.

    Parameters:
        params (list[np.ndarray]): Arrays to optimize (updated in place)
        lr (float): Learning rate
        b1, b2 (float): Moment decay rates
        eps (float): Denominator offset
    """

    def __init__(self, params: list, lr: float = 1e-3, b1: float = 0.9, b2: float = 0.999, eps: float = 1e-8):
        if lr < 0:
            raise ValueError(f"Learning rate must be non-negative, got {lr}")
        if not (0 <= b1 < 1 and 0 <= b2 < 1):
            raise ValueError(f"Moment decays must be in [0, 1), got b1={b1}, b2={b2}")
        self.params = params
        self.lr = lr
        self.b1 = b1
        self.b2 = b2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads: list):
        """
        Apply one update given gradients aligned with params.
        """
        if len(grads) != len(self.params):
            raise ValueError(f"Expected {len(self.params)} gradients, got {len(grads)}")
        self.t += 1
        for i, (p, g) in enumerate(zip(self.params, grads)):
            if g.shape != p.shape:
                raise ValueError(f"Gradient {i} has shape {g.shape}, parameter has {p.shape}")
            self.m[i] = self.b1 * self.m[i] + (1 - self.b1) * g
            self.v[i] = self.b2 * self.v[i] + (1 - self.b2) * g ** 2
            m_hat = self.m[i] / (1 - self.b1 ** self.t)
            v_hat = self.v[i] / (1 - self.b2 ** self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
