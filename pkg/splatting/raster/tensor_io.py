"""
Tensor File Module
------------------
Reader / writer for "MFT1" grid tensors, shared by rendered targets, feature
maps, uncertainty maps, score maps and masks.

Layout (little-endian):
    magic "MFT1", u32 H, u32 W, u32 K      (16 bytes)
    H * W * K f32 values, row-major

PNG previews of the same grids are written with Pillow.
"""

import os

import numpy as np
from PIL import Image

MAGIC = b"MFT1"
HEADER_DTYPE = np.dtype("<u4")
VALUE_DTYPE = np.dtype("<f4")


def tensor_to_bytes(array: np.ndarray) -> bytes:
    """
    Serialize an (H, W) or (H, W, K) grid. Booleans are stored as 0/1.
    """
    array = np.asarray(array)
    if array.ndim == 2:
        array = array[:, :, np.newaxis]
    elif array.ndim != 3:
        raise ValueError(f"Expected (H, W) or (H, W, K) array, got shape {array.shape}")

    values = array.astype(VALUE_DTYPE)
    if not np.all(np.isfinite(values)):
        raise ValueError("Tensor contains non-finite values")

    header = MAGIC + np.array(array.shape, dtype=HEADER_DTYPE).tobytes()
    return header + np.ascontiguousarray(values).tobytes()


def tensor_from_bytes(data: bytes) -> np.ndarray:
    """
    Parse MFT1 bytes into a float64 (H, W, K) array.
    """
    if len(data) < 16 or data[:4] != MAGIC:
        raise ValueError("Not an MFT1 tensor")

    H, W, K = (int(v) for v in np.frombuffer(data[4:16], dtype=HEADER_DTYPE))
    expected = 16 + H * W * K * VALUE_DTYPE.itemsize
    if len(data) != expected:
        raise ValueError(f"Tensor size {len(data)} does not match header {H}x{W}x{K}")

    return np.frombuffer(data[16:], dtype=VALUE_DTYPE).reshape(H, W, K).astype(np.float64)


def save_tensor(path: str, array: np.ndarray):
    """
    Write a grid tensor atomically.
    """
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as f:
        f.write(tensor_to_bytes(array))
    os.replace(tmp, path)


def load_tensor(path: str, squeeze: bool = False) -> np.ndarray:
    """
    Read a grid tensor.

    Parameters:
        path (str): MFT1 file
        squeeze (bool): Drop the channel axis when K == 1

    Returns:
        np.ndarray: float64 (H, W, K) or (H, W)
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"Tensor file '{path}' not found")
    with open(path, "rb") as f:
        array = tensor_from_bytes(f.read())
    if squeeze and array.shape[2] == 1:
        return array[:, :, 0]
    return array


def save_png(path: str, array: np.ndarray):
    """
    Write a [0, 1] grid as an 8-bit PNG preview (RGB for K = 3, grayscale otherwise).
    """
    array = np.asarray(array, dtype=np.float64)
    if array.ndim == 3 and array.shape[2] == 1:
        array = array[:, :, 0]
    if array.ndim == 3 and array.shape[2] != 3:
        raise ValueError(f"PNG preview needs 1 or 3 channels, got {array.shape[2]}")

    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    pixels = np.round(np.clip(array, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(pixels).save(path)
