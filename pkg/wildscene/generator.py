"""
Generator Module
----------------
Synthetic unconstrained photo collection: labeled Gaussian objects, a ring
of cameras, one appearance per photo and rectangular transient occluders.

Everything is a pure function of the SceneSpec; generated values are
rounded to float32 so persisted and in-memory scenes are identical.
"""

from dataclasses import dataclass

import numpy as np

from splatting.core.camera import Camera
from splatting.core.gaussian import Scene
from splatting.raster.rasterizer import BlendWeights

from .appearance import AppearanceEmbedding, appearance_colors, select_novel_views
from .seeding import as_f32, rng_for
from .spec import SceneSpec

BACKGROUND = -1

# flat occluder colors, cycled by transient class
TRANSIENT_PALETTE = np.array([
    [0.85, 0.20, 0.20],
    [0.20, 0.25, 0.85],
    [0.90, 0.80, 0.15],
    [0.15, 0.75, 0.30],
])

OBJECT_RING_RADIUS = 1.6
CAMERA_RING_RADIUS = 6.0
CAMERA_HEIGHT = 2.5
FIELD_OF_VIEW_DEG = 50.0


@dataclass(frozen=True)
class TransientRegion:
    """
    Axis-aligned pixel rectangle [y0, y1) x [x0, x1) covered by an occluder.
    """
    y0: int
    x0: int
    y1: int
    x1: int
    class_id: int

    def mask(self, shape: tuple) -> np.ndarray:
        m = np.zeros(shape, dtype=bool)
        m[self.y0:self.y1, self.x0:self.x1] = True
        return m

    def to_dict(self) -> dict:
        return {"y0": self.y0, "x0": self.x0, "y1": self.y1, "x1": self.x1, "class_id": self.class_id}


@dataclass(frozen=True)
class UnconstrainedView:
    """
    One synthetic photo.

    Parameters:
        index (int): Position in the collection
        camera (Camera): Pose and intrinsics
        appearance (AppearanceEmbedding): The photo's own appearance l_i
        transient_regions (tuple[TransientRegion]): Occluders
        image (np.ndarray): (H, W, 3) photo in [0, 1]
        label_map (np.ndarray): (H, W) dominant object class, -1 for background
    """
    index: int
    camera: Camera
    appearance: AppearanceEmbedding
    transient_regions: tuple
    image: np.ndarray
    label_map: np.ndarray

    def __post_init__(self):
        H, W = self.camera.resolution
        for r in self.transient_regions:
            if not (0 <= r.y0 < r.y1 <= H and 0 <= r.x0 < r.x1 <= W):
                raise ValueError(f"Transient region {r} outside {H}x{W} image")
        if self.image.shape != (H, W, 3) or np.any(self.image < 0) or np.any(self.image > 1):
            raise ValueError("image must be (H, W, 3) with values in [0, 1]")

    @property
    def shape(self) -> tuple:
        return self.camera.resolution

    def transient_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for r in self.transient_regions:
            mask |= r.mask(self.shape)
        return mask

    @property
    def gt_mask_per_query(self) -> dict:
        classes = [int(c) for c in np.unique(self.label_map) if c != BACKGROUND]
        return {c: gt_mask(self, c) for c in classes}


def camera_ring(spec: SceneSpec) -> list:
    """
    Cameras evenly spaced on a ring around the objects, all looking at the origin.
    """
    focal = 0.5 * spec.width / np.tan(np.radians(FIELD_OF_VIEW_DEG) / 2.0)
    cams = []
    for v in range(spec.views):
        phi = 2.0 * np.pi * v / spec.views + 0.3
        eye = as_f32([CAMERA_RING_RADIUS * np.cos(phi), CAMERA_RING_RADIUS * np.sin(phi), CAMERA_HEIGHT])
        cams.append(Camera.look_at(eye, (0.0, 0.0, 0.0), (spec.height, spec.width), focal))
    return cams


def _gen_gaussians(spec: SceneSpec) -> Scene:
    rng = rng_for(spec.seed, "layout")
    K, G = spec.num_classes, spec.num_gaussians

    jitter = rng.uniform(-0.2, 0.2, K)
    angles = 2.0 * np.pi * np.arange(K) / K + jitter
    ring = OBJECT_RING_RADIUS if K > 1 else 0.0
    centers = np.stack([ring * np.cos(angles), ring * np.sin(angles), np.zeros(K)], axis=1)
    radii = rng.uniform(0.55, 0.8, K)
    palette = rng.uniform(0.15, 0.85, (K, 3))

    class_ids = np.repeat(np.arange(K), [G // K + (1 if k < G % K else 0) for k in range(K)])

    # Gaussians sit on a shell around each object center
    directions = rng.standard_normal((G, 3))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    shell = radii[class_ids] * rng.uniform(0.85, 1.0, G)
    positions = centers[class_ids] + directions * shell[:, np.newaxis]

    scales = np.exp(rng.uniform(np.log(0.14), np.log(0.26), (G, 3)))
    rotations = rng.standard_normal((G, 4))
    rotations /= np.linalg.norm(rotations, axis=1, keepdims=True)
    opacities = rng.uniform(0.75, 0.98, G)
    colors = np.clip(palette[class_ids] + rng.normal(0.0, 0.04, (G, 3)), 0.0, 1.0)

    return Scene(
        positions=as_f32(positions),
        scales=as_f32(scales),
        rotations=as_f32(rotations),
        opacities=as_f32(opacities),
        base_colors=as_f32(colors),
        class_ids=class_ids,
        lang_features=np.zeros((G, spec.N, spec.C)),
        appearance_dim=spec.d_a,
        feature_dim_high=spec.D,
    )


def _gen_transients(spec: SceneSpec, rng: np.random.Generator) -> tuple:
    H, W = spec.height, spec.width
    if spec.max_transients == 0 or not rng.random() < spec.transient_rate:
        return ()

    regions = []
    for _ in range(int(rng.integers(1, spec.max_transients + 1))):
        h = int(rng.integers(max(1, int(0.2 * H)), int(0.4 * H) + 1))
        w = int(rng.integers(max(1, int(0.2 * W)), int(0.4 * W) + 1))
        y0 = int(rng.integers(0, H - h + 1))
        x0 = int(rng.integers(0, W - w + 1))
        cls = spec.num_classes + int(rng.integers(spec.num_transient_classes))
        regions.append(TransientRegion(y0, x0, y0 + h, x0 + w, cls))
    return tuple(regions)


def dominant_class_map(scene: Scene, cam: Camera, weights: BlendWeights = None) -> np.ndarray:
    """
    Per pixel, the class with the largest composited weight, or -1 when the
    remaining transmittance (background) outweighs every class.

    Ties go to the lowest class index.
    """
    H, W = cam.resolution
    if len(scene) == 0:
        return np.full((H, W), BACKGROUND, dtype=np.int64)
    if weights is None:
        weights = BlendWeights(scene, cam)

    num_classes = int(scene.class_ids.max()) + 1
    one_hot = np.zeros((len(scene), num_classes))
    one_hot[np.arange(len(scene)), scene.class_ids] = 1.0
    class_weight = weights.composite(one_hot, dtype=np.float64).channels

    background = (1.0 - weights.alpha_accum)[:, :, np.newaxis]
    labels = np.argmax(np.concatenate([class_weight, background], axis=2), axis=2)
    labels[labels == num_classes] = BACKGROUND
    return labels.astype(np.int64)


def _render_colors(scene: Scene, cam: Camera, appearance: AppearanceEmbedding,
                   regions: tuple, with_transients: bool) -> np.ndarray:
    colors = appearance_colors(scene.base_colors, appearance, scene.appearance_dim)
    image = BlendWeights(scene, cam).composite(colors, dtype=np.float32).channels.astype(np.float64)
    image = np.clip(image, 0.0, 1.0)
    if with_transients:
        for r in regions:
            image[r.y0:r.y1, r.x0:r.x1] = TRANSIENT_PALETTE[r.class_id % len(TRANSIENT_PALETTE)]
    return image


def render_view(scene: Scene, view: UnconstrainedView, with_transients: bool,
                appearance: AppearanceEmbedding = None) -> np.ndarray:
    """
    Render a view's camera under an appearance.

    Parameters:
        scene (Scene): Scene to render
        view (UnconstrainedView): Source of the camera and occluders
        with_transients (bool): Paint the view's occluders over the render
        appearance (AppearanceEmbedding): Swapped-in appearance; defaults to the view's own

    Returns:
        np.ndarray: (H, W, 3) image in [0, 1]
    """
    appearance = view.appearance if appearance is None else appearance
    return _render_colors(scene, view.camera, appearance, view.transient_regions, with_transients)


def gen_scene(spec: SceneSpec) -> tuple:
    """
    Generate the scene and its unconstrained views.

    Parameters:
        spec (SceneSpec): Generation parameters

    Returns:
        tuple: (Scene, list[UnconstrainedView])
    """
    spec.validate()
    scene = _gen_gaussians(spec)

    app_rng = rng_for(spec.seed, "appearance")
    transient_rng = rng_for(spec.seed, "transient")

    views = []
    for v, cam in enumerate(camera_ring(spec)):
        appearance = AppearanceEmbedding.random(spec.d_a, app_rng)
        regions = _gen_transients(spec, transient_rng)
        image = _render_colors(scene, cam, appearance, regions, with_transients=True)
        views.append(UnconstrainedView(
            index=v,
            camera=cam,
            appearance=appearance,
            transient_regions=regions,
            image=image,
            label_map=dominant_class_map(scene, cam),
        ))
    return scene, views


def gt_mask(view: UnconstrainedView, class_id: int) -> np.ndarray:
    """
    Ground-truth mask: dominant class equals class_id and no occluder covers the pixel.
    """
    return (view.label_map == class_id) & ~view.transient_mask()


def self_render_errors(scene: Scene, views: list) -> list:
    """
    Mean L1 error between each view's occluder-free self render and its photo.
    """
    return [float(np.mean(np.abs(render_view(scene, v, with_transients=False) - v.image))) for v in views]


def select_novel_appearances(scene: Scene, views: list, n_minus_1: int,
                             eps_q: float, eps_d: float) -> list:
    """
    Pick N - 1 appearance embeddings satisfying the quality and distance bounds.

    Returns:
        list[AppearanceEmbedding]

    Raises:
        InsufficientCandidatesError
    """
    chosen = select_novel_views(self_render_errors(scene, views), [v.appearance for v in views],
                                n_minus_1, eps_q, eps_d)
    return [views[i].appearance for i in chosen]
