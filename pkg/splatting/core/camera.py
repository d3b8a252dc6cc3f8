"""
Camera Module
-------------
Pinhole camera with a rigid world-to-camera transform.

Camera space follows the x-right, y-down, z-forward convention; pixel
(row v, column u) is centered at image coordinates (u, v).
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Camera:
    """
    Parameters:
        extrinsic (np.ndarray): (4, 4) world-to-camera rigid transform W
        focal (np.ndarray): (fx, fy) in pixels
        principal_point (np.ndarray): (cx, cy) in pixels
        resolution (tuple): (H, W) in pixels
        near_plane (float): Smallest accepted camera-space depth
    """
    extrinsic: np.ndarray
    focal: np.ndarray
    principal_point: np.ndarray
    resolution: tuple
    near_plane: float = 0.1

    def __post_init__(self):
        extrinsic = np.array(self.extrinsic, dtype=np.float64)
        focal = np.array(self.focal, dtype=np.float64).reshape(2)
        principal = np.array(self.principal_point, dtype=np.float64).reshape(2)
        resolution = tuple(int(v) for v in self.resolution)

        if extrinsic.shape != (4, 4):
            raise ValueError(f"extrinsic must be a 4x4 matrix, got {extrinsic.shape}")
        if not (np.all(np.isfinite(extrinsic)) and np.all(np.isfinite(focal)) and np.all(np.isfinite(principal))):
            raise ValueError("Camera parameters must be finite")
        rot = extrinsic[:3, :3]
        if not np.allclose(rot @ rot.T, np.eye(3), atol=1e-6) or not np.allclose(extrinsic[3], [0, 0, 0, 1]):
            raise ValueError("extrinsic must be a rigid transform")
        if np.any(focal <= 0):
            raise ValueError(f"focal must be positive, got {focal}")
        if not self.near_plane > 0:
            raise ValueError(f"near_plane must be positive, got {self.near_plane}")
        if len(resolution) != 2 or min(resolution) < 1:
            raise ValueError(f"resolution must be (H, W) with positive sizes, got {self.resolution}")

        for arr in (extrinsic, focal, principal):
            arr.flags.writeable = False
        object.__setattr__(self, "extrinsic", extrinsic)
        object.__setattr__(self, "focal", focal)
        object.__setattr__(self, "principal_point", principal)
        object.__setattr__(self, "resolution", resolution)
        object.__setattr__(self, "near_plane", float(self.near_plane))

    @property
    def height(self) -> int:
        return self.resolution[0]

    @property
    def width(self) -> int:
        return self.resolution[1]

    @property
    def rotation(self) -> np.ndarray:
        return self.extrinsic[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.extrinsic[:3, 3]

    def to_camera(self, points: np.ndarray) -> np.ndarray:
        """
        Transform (..., 3) world points into camera space.
        """
        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation

    @classmethod
    def look_at(cls, eye, target, resolution, focal, up=(0.0, 0.0, 1.0), near_plane=0.1) -> "Camera":
        """
        Build a camera at `eye` looking at `target`.

        Parameters:
            eye, target (array-like): World positions
            resolution (tuple): (H, W)
            focal (float or pair): Focal length(s) in pixels
            up (array-like): World up direction, must not be parallel to the view
            near_plane (float): Near plane depth

        Returns:
            Camera: principal point at the image center
        """
        eye = np.asarray(eye, dtype=np.float64)
        forward = np.asarray(target, dtype=np.float64) - eye
        norm = np.linalg.norm(forward)
        if norm == 0:
            raise ValueError("eye and target coincide")
        forward /= norm

        right = np.cross(forward, np.asarray(up, dtype=np.float64))
        if np.linalg.norm(right) < 1e-9:
            raise ValueError("up vector is parallel to the viewing direction")
        right /= np.linalg.norm(right)
        down = np.cross(forward, right)

        extrinsic = np.eye(4)
        extrinsic[:3, :3] = np.stack([right, down, forward])
        extrinsic[:3, 3] = -extrinsic[:3, :3] @ eye

        H, W = resolution
        focal = np.broadcast_to(np.asarray(focal, dtype=np.float64), (2,))
        return cls(extrinsic=extrinsic, focal=focal,
                   principal_point=((W - 1) / 2.0, (H - 1) / 2.0),
                   resolution=(H, W), near_plane=near_plane)

    def to_dict(self) -> dict:
        return {
            "extrinsic": self.extrinsic.tolist(),
            "focal": self.focal.tolist(),
            "principal_point": self.principal_point.tolist(),
            "resolution": list(self.resolution),
            "near_plane": self.near_plane,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Camera":
        return cls(**data)
