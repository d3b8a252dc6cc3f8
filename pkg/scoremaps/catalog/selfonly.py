from ..base import BaseEnsemble


class Selfonly(BaseEnsemble):
    """
    No ensemble: use the self-appearance slot (the last map) alone.
    """

    def combine(self, stack):
        return stack[-1].copy()
