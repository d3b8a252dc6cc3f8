"""
splatting
---------
Gaussian scene representation, projection and differentiable rasterization.
"""

from .core import *
from .raster import *

__all__ = core.__all__ + raster.__all__
