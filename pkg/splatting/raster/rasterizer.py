"""
Rasterizer Module
-----------------
Front-to-back alpha compositing of per-Gaussian channel vectors and its
adjoint with respect to those channels.

For a pixel covered by depth-sorted splats i = 1..M:

    I(r) = sum_i T_i a_i f_i,   T_i = prod_{j<i} (1 - a_j)

Geometry is fixed, so the blend weights T_i a_i depend only on
(scene, camera). They are computed once per view as a BlendWeights object;
rendering applies them to any channel set and the backward pass applies
their transpose. Each splat only touches pixels inside the radius where its
weight can still reach the 1/255 cutoff.
"""

from dataclasses import dataclass
from typing import Union

import numpy as np

from ..core.camera import Camera
from ..core.gaussian import Scene
from ..core.projection import depth_sort, project_scene, splat_weights


@dataclass(frozen=True)
class RenderTarget:
    """
    Parameters:
        channels (np.ndarray): (H, W, K) composited channels
        alpha_accum (np.ndarray): (H, W) accumulated opacity in [0, 1]
    """
    channels: np.ndarray
    alpha_accum: np.ndarray

    def __post_init__(self):
        if self.channels.ndim != 3 or self.channels.shape[:2] != self.alpha_accum.shape:
            raise ValueError(f"Mismatched target shapes {self.channels.shape} / {self.alpha_accum.shape}")
        if not (np.all(np.isfinite(self.channels)) and np.all(np.isfinite(self.alpha_accum))):
            raise ValueError("Render target contains non-finite values")
        if np.any(self.alpha_accum < 0) or np.any(self.alpha_accum > 1):
            raise ValueError("alpha_accum must lie in [0, 1]")

    @property
    def shape(self) -> tuple:
        return self.channels.shape


@dataclass(frozen=True)
class ChannelGradients:
    """
    Per-Gaussian gradient of a loss with respect to the composited channels.

    Parameters:
        values (np.ndarray): (G, K); rows of culled Gaussians are zero
    """
    values: np.ndarray


@dataclass(frozen=True)
class Footprint:
    source_index: int
    rows: slice
    cols: slice
    weights: np.ndarray


class BlendWeights:
    """
    Per-splat blend weights T_i * a_i for one (scene, camera) pair.
    """

    def __init__(self, scene: Scene, cam: Camera):
        H, W = cam.resolution
        self.resolution = (H, W)
        self.num_gaussians = len(scene)
        self.footprints = []

        transmittance = np.ones((H, W), dtype=np.float64)
        for splat in depth_sort(project_scene(scene, cam)):
            radius = splat.radius()
            cx, cy = splat.center_px
            x0, x1 = max(0, int(np.floor(cx - radius))), min(W, int(np.ceil(cx + radius)) + 1)
            y0, y1 = max(0, int(np.floor(cy - radius))), min(H, int(np.ceil(cy + radius)) + 1)
            if splat.culled or x0 >= x1 or y0 >= y1:
                continue

            ys, xs = np.mgrid[y0:y1, x0:x1].astype(np.float64)
            alpha = splat_weights(splat, xs, ys)
            if not np.any(alpha):
                continue

            rows, cols = slice(y0, y1), slice(x0, x1)
            weights = transmittance[rows, cols] * alpha
            transmittance[rows, cols] *= 1.0 - alpha
            self.footprints.append(Footprint(splat.source_index, rows, cols, weights))

        self.alpha_accum = 1.0 - transmittance
        self._matrix = None

    def composite(self, channels: np.ndarray, dtype=np.float32) -> RenderTarget:
        """
        Composite (G, K) channels into an (H, W, K) target; uncovered pixels stay zero.
        """
        channels = _check_channels(channels, self.num_gaussians)
        out = np.zeros(self.resolution + (channels.shape[1],), dtype=np.float64)
        for fp in self.footprints:
            out[fp.rows, fp.cols] += fp.weights[:, :, np.newaxis] * channels[fp.source_index]
        return RenderTarget(out.astype(dtype), self.alpha_accum.astype(dtype))

    def adjoint(self, upstream: np.ndarray) -> ChannelGradients:
        """
        Apply the transpose of compositing to an (H, W, K) upstream gradient.
        """
        upstream = np.asarray(upstream, dtype=np.float64)
        if upstream.ndim != 3 or upstream.shape[:2] != self.resolution:
            raise ValueError(f"Upstream gradient shape {upstream.shape} does not match image {self.resolution}")

        grads = np.zeros((self.num_gaussians, upstream.shape[2]), dtype=np.float64)
        for fp in self.footprints:
            grads[fp.source_index] = np.einsum("hw,hwk->k", fp.weights, upstream[fp.rows, fp.cols])
        return ChannelGradients(grads)

    def matrix(self) -> np.ndarray:
        """
        Dense (H * W, G) blend matrix; rendering is matrix @ channels.
        """
        if self._matrix is None:
            H, W = self.resolution
            m = np.zeros((H, W, self.num_gaussians), dtype=np.float64)
            for fp in self.footprints:
                m[fp.rows, fp.cols, fp.source_index] = fp.weights
            self._matrix = m.reshape(H * W, self.num_gaussians)
        return self._matrix

    def coverage(self) -> np.ndarray:
        """
        Total blend weight each Gaussian receives over the image.
        """
        totals = np.zeros(self.num_gaussians, dtype=np.float64)
        for fp in self.footprints:
            totals[fp.source_index] = fp.weights.sum()
        return totals


def _check_channels(channels: np.ndarray, count: int) -> np.ndarray:
    channels = np.asarray(channels, dtype=np.float64)
    if channels.ndim == 1:
        channels = channels[:, np.newaxis]
    if channels.ndim != 2 or channels.shape[0] != count:
        raise ValueError(f"Expected ({count}, K) channels, got {channels.shape}")
    if not np.all(np.isfinite(channels)):
        raise ValueError("Channel values must be finite")
    return channels


def select_channels(scene: Scene, channel_selector: Union[str, np.ndarray]) -> np.ndarray:
    """
    Resolve which per-Gaussian vector to composite.

    Parameters:
        scene (Scene): Source scene
        channel_selector (str or np.ndarray):
            "color"     base colors (K = 3)
            "lang:<n>"  language slot n (K = C)
            "lang"      every slot concatenated (K = N * C)
            "class"     one-hot class labels (K = max class id + 1)
            array       explicit (G, K) channels

    Returns:
        np.ndarray: (G, K) float64 channels
    """
    if not isinstance(channel_selector, str):
        return _check_channels(channel_selector, len(scene))

    if channel_selector == "color":
        return scene.base_colors
    if channel_selector == "lang":
        return scene.lang_features.reshape(len(scene), -1)
    if channel_selector.startswith("lang:"):
        slot = int(channel_selector.split(":", 1)[1])
        if not 0 <= slot < scene.num_appearance_slots:
            raise ValueError(f"Slot {slot} out of range for N = {scene.num_appearance_slots}")
        return scene.lang_features[:, slot, :]
    if channel_selector == "class":
        width = int(scene.class_ids.max()) + 1 if len(scene) else 1
        one_hot = np.zeros((len(scene), width))
        one_hot[np.arange(len(scene)), scene.class_ids] = 1.0
        return one_hot

    raise ValueError(f"Unknown channel selector '{channel_selector}'")


def render(scene: Scene, cam: Camera, channel_selector="color", dtype=np.float32,
           weights: BlendWeights = None) -> RenderTarget:
    """
    Composite one per-Gaussian vector front to back.

    Parameters:
        scene (Scene): Scene to render
        cam (Camera): Viewing camera
        channel_selector (str or np.ndarray): See select_channels
        dtype: Storage dtype of the result (accumulation is float64)
        weights (BlendWeights): Optional precomputed weights for (scene, cam)

    Returns:
        RenderTarget: Background contributes the zero vector
    """
    channels = select_channels(scene, channel_selector)
    if weights is None:
        weights = BlendWeights(scene, cam)
    return weights.composite(channels, dtype=dtype)


def render_language_maps(scene: Scene, cam: Camera, dtype=np.float32, weights: BlendWeights = None) -> list:
    """
    Render each of the N language slots as a C-channel target.

    Returns:
        list[RenderTarget]: Novel-appearance slots first, self slot last
    """
    if weights is None:
        weights = BlendWeights(scene, cam)
    return [weights.composite(scene.lang_features[:, n, :], dtype=dtype)
            for n in range(scene.num_appearance_slots)]


def backward_channels(scene: Scene, cam: Camera, channel_selector, upstream: np.ndarray,
                      weights: BlendWeights = None) -> ChannelGradients:
    """
    Gradient of a loss with respect to the composited channels.

    Compositing is linear in the channels, so d pixel / d f_i = T_i a_i and
    the per-Gaussian gradient is the upstream-weighted sum over its pixels.

    Parameters:
        scene (Scene): Scene that was rendered
        cam (Camera): Camera that was used
        channel_selector (str or np.ndarray): Same selector as the forward pass
        upstream (np.ndarray): (H, W, K) gradient of the loss w.r.t. the target

    Returns:
        ChannelGradients: (G, K) gradients

    Raises:
        ValueError on shape mismatch
    """
    channels = select_channels(scene, channel_selector)
    upstream = np.asarray(upstream)
    if upstream.ndim != 3 or upstream.shape[2] != channels.shape[1]:
        raise ValueError(f"Upstream has shape {upstream.shape}, expected K = {channels.shape[1]}")
    if weights is None:
        weights = BlendWeights(scene, cam)
    return weights.adjoint(upstream)
