"""
Scene File Module
-----------------
Binary scene records ("MGS1").

Layout (little-endian):
    header: magic "MGS1", u32 count, u32 N, u32 C        (16 bytes)
    record per Gaussian, f32 fields in declared order:
        position(3) scale(3) rotation(4) opacity(1) base_color(3)
        class_id(1) lang_features(N * C)

Fields are written as f32; in-memory values that are already f32
representable therefore round-trip bit-exactly.
"""

import os

import numpy as np

from .gaussian import Scene

MAGIC = b"MGS1"
HEADER_DTYPE = np.dtype("<u4")
RECORD_DTYPE = np.dtype("<f4")
FIXED_FIELDS = 3 + 3 + 4 + 1 + 3 + 1


def _record_width(num_slots: int, feature_dim: int) -> int:
    return FIXED_FIELDS + num_slots * feature_dim


def scene_to_bytes(scene: Scene) -> bytes:
    count, N, C = len(scene), scene.num_appearance_slots, scene.feature_dim_low
    records = np.concatenate([
        scene.positions,
        scene.scales,
        scene.rotations,
        scene.opacities[:, np.newaxis],
        scene.base_colors,
        scene.class_ids[:, np.newaxis].astype(np.float64),
        scene.lang_features.reshape(count, N * C),
    ], axis=1)

    header = MAGIC + np.array([count, N, C], dtype=HEADER_DTYPE).tobytes()
    return header + records.astype(RECORD_DTYPE).tobytes()


def scene_from_bytes(data: bytes, appearance_dim: int, feature_dim_high: int) -> Scene:
    if len(data) < 16 or data[:4] != MAGIC:
        raise ValueError("Not an MGS1 scene file")

    count, N, C = (int(v) for v in np.frombuffer(data[4:16], dtype=HEADER_DTYPE))
    width = _record_width(N, C)
    expected = 16 + count * width * RECORD_DTYPE.itemsize
    if len(data) != expected:
        raise ValueError(f"Scene file size {len(data)} does not match header (expected {expected})")

    records = np.frombuffer(data[16:], dtype=RECORD_DTYPE).reshape(count, width).astype(np.float64)
    return Scene(
        positions=records[:, 0:3],
        scales=records[:, 3:6],
        rotations=records[:, 6:10],
        opacities=records[:, 10],
        base_colors=records[:, 11:14],
        class_ids=records[:, 14].astype(np.int64),
        lang_features=records[:, FIXED_FIELDS:].reshape(count, N, C),
        appearance_dim=appearance_dim,
        feature_dim_high=feature_dim_high,
    )


def save_scene(path: str, scene: Scene):
    """
    Write a scene atomically (temp file then rename).

    Parameters:
        path (str): Destination file
        scene (Scene): Scene to store
    """
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as f:
        f.write(scene_to_bytes(scene))
    os.replace(tmp, path)


def load_scene(path: str, appearance_dim: int, feature_dim_high: int) -> Scene:
    """
    Read a scene written by save_scene.

    The header stores only (count, N, C); appearance_dim and D come from the
    caller.

    Raises:
        FileNotFoundError, ValueError
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"Scene file '{path}' not found")
    with open(path, "rb") as f:
        return scene_from_bytes(f.read(), appearance_dim, feature_dim_high)
