"""
Projection Module
-----------------
EWA projection of 3D Gaussians to screen-space splats.

    Sigma' = J W Sigma W^T J^T

with J the affine Jacobian of the pinhole projection evaluated at the
Gaussian mean. A 0.3 pixel isotropic dilation is added to the 2x2 block
before inversion, and splat weights below 1/255 are reported as zero.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .camera import Camera
from .gaussian import Gaussian3D, Scene, covariance_3d

DILATION = 0.3
WEIGHT_CUTOFF = 1.0 / 255.0


@dataclass(frozen=True)
class Splat2D:
    """
    Screen-space footprint of one Gaussian.

    Parameters:
        center_px (np.ndarray): (x, y) center in pixels
        conic (np.ndarray): (2, 2) inverse of the dilated screen covariance
        depth (float): Camera-space z of the mean
        opacity (float): Opacity of the source Gaussian
        source_index (int): Index of the Gaussian in its scene
    """
    center_px: np.ndarray
    conic: np.ndarray
    depth: float
    opacity: float
    source_index: int

    @property
    def covariance(self) -> np.ndarray:
        return np.linalg.inv(self.conic)

    @property
    def culled(self) -> bool:
        """
        True when even the center weight falls below the cutoff.
        """
        return self.opacity < WEIGHT_CUTOFF

    def radius(self) -> float:
        """
        Distance beyond which the splat weight is always below the cutoff.
        """
        if self.culled:
            return 0.0
        lam_max = np.linalg.eigvalsh(self.covariance)[-1]
        return float(np.sqrt(2.0 * max(0.0, np.log(self.opacity / WEIGHT_CUTOFF)) * lam_max))


def _project_arrays(positions, covariances, cam: Camera):
    """
    Vectorized EWA projection.

    Returns:
        tuple: (centers (G, 2), conics (G, 2, 2), depths (G,), visible (G,) bool)
    """
    if not (np.all(np.isfinite(positions)) and np.all(np.isfinite(covariances))):
        raise ValueError("Non-finite Gaussian parameters cannot be projected")

    p_cam = cam.to_camera(positions)
    x, y, z = p_cam[:, 0], p_cam[:, 1], p_cam[:, 2]
    visible = z >= cam.near_plane

    # culled rows still get a finite (unused) projection
    z_safe = np.where(visible, z, 1.0)
    fx, fy = cam.focal
    cx, cy = cam.principal_point

    J = np.zeros((len(z), 2, 3))
    J[:, 0, 0] = fx / z_safe
    J[:, 0, 2] = -fx * x / z_safe ** 2
    J[:, 1, 1] = fy / z_safe
    J[:, 1, 2] = -fy * y / z_safe ** 2

    T = J @ cam.rotation
    cov2d = T @ covariances @ np.swapaxes(T, 1, 2)
    cov2d[:, 0, 0] += DILATION
    cov2d[:, 1, 1] += DILATION

    det = cov2d[:, 0, 0] * cov2d[:, 1, 1] - cov2d[:, 0, 1] * cov2d[:, 1, 0]
    conics = np.empty_like(cov2d)
    conics[:, 0, 0] = cov2d[:, 1, 1] / det
    conics[:, 1, 1] = cov2d[:, 0, 0] / det
    conics[:, 0, 1] = conics[:, 1, 0] = -0.5 * (cov2d[:, 0, 1] + cov2d[:, 1, 0]) / det

    centers = np.stack([fx * x / z_safe + cx, fy * y / z_safe + cy], axis=1)
    return centers, conics, z, visible


def project_scene(scene: Scene, cam: Camera) -> list:
    """
    Project every Gaussian of a scene.

    Parameters:
        scene (Scene): Scene to project
        cam (Camera): Viewing camera

    Returns:
        list[Splat2D]: Visible splats in scene order (culled ones omitted)
    """
    if len(scene) == 0:
        return []

    centers, conics, depths, visible = _project_arrays(scene.positions, scene.covariances(), cam)
    return [
        Splat2D(center_px=centers[k], conic=conics[k], depth=float(depths[k]),
                opacity=float(scene.opacities[k]), source_index=k)
        for k in np.flatnonzero(visible)
    ]


def project_gaussian(g: Gaussian3D, cam: Camera, source_index: int = 0) -> Optional[Splat2D]:
    """
    Project a single Gaussian.

    Parameters:
        g (Gaussian3D): Gaussian to project
        cam (Camera): Viewing camera
        source_index (int): Index recorded on the splat

    Returns:
        Splat2D or None: None when the mean lies in front of the near plane
    """
    centers, conics, depths, visible = _project_arrays(
        g.position[np.newaxis], covariance_3d(g.scale, g.rotation)[np.newaxis], cam)
    if not visible[0]:
        return None
    return Splat2D(center_px=centers[0], conic=conics[0], depth=float(depths[0]),
                   opacity=float(g.opacity), source_index=source_index)


def depth_sort(splats: list) -> list:
    """
    Order splats front to back; equal depths fall back to source index.
    """
    for s in splats:
        if not np.isfinite(s.depth):
            raise ValueError(f"Splat {s.source_index} has non-finite depth")
    return sorted(splats, key=lambda s: (s.depth, s.source_index))


def gaussian_weight_at(splat: Splat2D, pixel) -> float:
    """
    Evaluate alpha' = opacity * exp(-1/2 d^T conic d) at a pixel position.

    Parameters:
        splat (Splat2D): Screen-space splat
        pixel (array-like): (x, y) position

    Returns:
        float: Weight in [0, 1], zero below the 1/255 cutoff
    """
    d = np.asarray(pixel, dtype=np.float64) - splat.center_px
    weight = splat.opacity * np.exp(-0.5 * d @ splat.conic @ d)
    return float(weight) if weight >= WEIGHT_CUTOFF else 0.0


def splat_weights(splat: Splat2D, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """
    Vectorized gaussian_weight_at over a grid of pixel coordinates.

    Parameters:
        splat (Splat2D): Screen-space splat
        xs, ys (np.ndarray): Broadcastable pixel coordinate arrays

    Returns:
        np.ndarray: Weights with the 1/255 cutoff applied
    """
    dx = xs - splat.center_px[0]
    dy = ys - splat.center_px[1]
    a, b, c = splat.conic[0, 0], splat.conic[0, 1], splat.conic[1, 1]
    power = -0.5 * (a * dx * dx + 2.0 * b * dx * dy + c * dy * dy)
    weights = splat.opacity * np.exp(power)
    weights[weights < WEIGHT_CUTOFF] = 0.0
    return weights
