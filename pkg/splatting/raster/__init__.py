"""
splatting.raster
----------------
Differentiable alpha-compositing rasterizer and the shared tensor file format.
"""

from .rasterizer import (RenderTarget, ChannelGradients, BlendWeights, select_channels,
                         render, render_language_maps, backward_channels)
from .tensor_io import save_tensor, load_tensor, tensor_to_bytes, tensor_from_bytes, save_png
from .feature_map import FeatureMap

__all__ = ["RenderTarget", "ChannelGradients", "BlendWeights", "select_channels",
           "render", "render_language_maps", "backward_channels",
           "save_tensor", "load_tensor", "tensor_to_bytes", "tensor_from_bytes", "save_png",
           "FeatureMap"]
