"""
splatting.core
--------------
Scene and camera representation plus screen-space projection.
"""

from .gaussian import Gaussian3D, Scene, quaternion_to_rotation, covariance_3d
from .camera import Camera
from .projection import Splat2D, project_gaussian, project_scene, depth_sort, gaussian_weight_at
from .scene_io import save_scene, load_scene

__all__ = ["Gaussian3D", "Scene", "quaternion_to_rotation", "covariance_3d",
           "Camera",
           "Splat2D", "project_gaussian", "project_scene", "depth_sort", "gaussian_weight_at",
           "save_scene", "load_scene"]
