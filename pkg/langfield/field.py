"""
Field Module
------------
Multi-appearance language field: N compressed language slots per Gaussian
(novel appearances 0 .. N-2, self appearance N-1) fitted to per-view latent
targets with geometry frozen.

Per view and slot n the loss is

    || (H~_n - H_n) * (1 - U^A) * (1 - U^T) ||_1

summed over pixels, channels and slots. Pixels not covered by any Gaussian
render a zero latent.
"""

import os
from dataclasses import dataclass

import numpy as np
from tqdm import tqdm

from splatting.core.camera import Camera
from splatting.core.gaussian import Scene
from splatting.core.scene_io import load_scene, save_scene
from splatting.raster.rasterizer import BlendWeights, render_language_maps
from wildscene.seeding import as_f32, rng_for

from .autoencoder import DivergenceError, MlpParams, encode_map
from .optim import Adam
from .uncertainty import UncertaintyMap, uncertainty_weight


@dataclass(frozen=True)
class FieldTargets:
    """
    Training targets of one view.

    Parameters:
        camera (Camera): View camera
        latents (list[np.ndarray]): N (H, W, C) latent maps, novel slots first, self last
        u_a (UncertaintyMap): Normalized appearance uncertainty
        u_t (UncertaintyMap): Normalized transient uncertainty
    """
    camera: Camera
    latents: list
    u_a: UncertaintyMap
    u_t: UncertaintyMap

    def __post_init__(self):
        if not self.latents:
            raise ValueError("FieldTargets needs at least one latent map")
        shapes = {np.shape(h) for h in self.latents}
        if len(shapes) != 1:
            raise ValueError(f"Latent maps must share one shape, got {sorted(shapes)}")
        H, W, _ = self.latents[0].shape
        if (H, W) != self.camera.resolution:
            raise ValueError(f"Latents are {H}x{W}, camera renders {self.camera.resolution}")
        for u in (self.u_a, self.u_t):
            if u.shape != (H, W) or not u.normalized:
                raise ValueError(f"{u.kind} uncertainty must be a normalized {H}x{W} map")

    @property
    def num_slots(self) -> int:
        return len(self.latents)

    @property
    def latent_dim(self) -> int:
        return self.latents[0].shape[2]

    def weight(self) -> np.ndarray:
        return uncertainty_weight(self.u_a, self.u_t)


@dataclass
class FieldTrainConfig:
    """
    Parameters:
        iterations (int): One view per iteration
        learning_rate (float): Adam step size for every slot
        seed (int): Seed of the view order
    """
    iterations: int = 30000
    learning_rate: float = 0.0025
    seed: int = 0

    def validate(self):
        if self.iterations < 0:
            raise ValueError(f"iterations must be >= 0, got {self.iterations}")
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")


@dataclass(frozen=True)
class FieldGradients:
    """
    Parameters:
        loss (float): Weighted L1 loss of one view
        slots (list[ChannelGradients]): (G, C) gradient per slot
    """
    loss: float
    slots: list


@dataclass(frozen=True)
class LanguageField:
    """
    A scene carrying trained language slots.

    Parameters:
        scene (Scene): Gaussians with (G, N, C) lang_features
        level (int): Semantic level the field was trained on
    """
    scene: Scene
    level: int = 0

    @classmethod
    def empty(cls, scene: Scene, num_slots: int, latent_dim: int, level: int = 0) -> "LanguageField":
        return cls(scene.with_lang_features(np.zeros((len(scene), num_slots, latent_dim))), level)

    def render(self, cam: Camera, weights: BlendWeights = None, dtype=np.float32) -> list:
        """
        Rendered (H, W, C) latent map per slot.
        """
        return [t.channels for t in render_language_maps(self.scene, cam, dtype=dtype, weights=weights)]

    def save(self, directory: str):
        os.makedirs(directory, exist_ok=True)
        save_scene(os.path.join(directory, "field.mgs"), self.scene)

    @classmethod
    def load(cls, directory: str, appearance_dim: int, feature_dim_high: int, level: int = 0) -> "LanguageField":
        return cls(load_scene(os.path.join(directory, "field.mgs"), appearance_dim, feature_dim_high), level)


def build_targets(params: MlpParams, features: list, u_a: UncertaintyMap, u_t: UncertaintyMap,
                  camera: Camera) -> FieldTargets:
    """
    Encode one view's N multi-appearance feature maps into latent targets.

    Parameters:
        params (MlpParams): Trained autoencoder
        features (list[FeatureMap]): N maps, novel appearances first, self last
        u_a, u_t (UncertaintyMap): Normalized uncertainties, passed through
        camera (Camera): View camera

    Returns:
        FieldTargets
    """
    latents = []
    for f in features:
        values = getattr(f, "values", f)
        if values.shape[2] != params.input_dim:
            raise ValueError(f"Features have {values.shape[2]} channels, autoencoder expects {params.input_dim}")
        latents.append(as_f32(encode_map(params, values)))
    return FieldTargets(camera, latents, u_a, u_t)


def _slot_loss(rendered: np.ndarray, target: np.ndarray, weight: np.ndarray) -> tuple:
    residual = rendered - target
    loss = float(np.sum(np.abs(residual) * weight[:, :, np.newaxis]))
    upstream = np.sign(residual) * weight[:, :, np.newaxis]
    return loss, upstream


def field_loss(field: LanguageField, cam: Camera, targets: FieldTargets,
               weights: BlendWeights = None) -> FieldGradients:
    """
    Uncertainty-weighted L1 loss of one view and its gradients.

    Parameters:
        field (LanguageField): Current slots
        cam (Camera): View camera
        targets (FieldTargets): That view's targets
        weights (BlendWeights): Optional precomputed blend weights for (scene, cam)

    Returns:
        FieldGradients
    """
    scene = field.scene
    if targets.num_slots != scene.num_appearance_slots:
        raise ValueError(f"Targets have {targets.num_slots} slots, scene has {scene.num_appearance_slots}")
    if targets.latent_dim != scene.feature_dim_low:
        raise ValueError(f"Targets have C = {targets.latent_dim}, scene has {scene.feature_dim_low}")
    if weights is None:
        weights = BlendWeights(scene, cam)

    pixel_weight = targets.weight()
    total, slots = 0.0, []
    for n, rendered in enumerate(field.render(cam, weights, dtype=np.float64)):
        loss, upstream = _slot_loss(rendered, targets.latents[n], pixel_weight)
        total += loss
        slots.append(weights.adjoint(upstream))
    return FieldGradients(total, slots)


def train_field(scene: Scene, targets: list, cfg: FieldTrainConfig, level: int = 0,
                verbose: bool = False) -> tuple:
    """
    Fit the language slots of a frozen scene to per-view targets.

    Slots start at zero and each has its own Adam state. Views are visited
    in seeded shuffled passes, one view per iteration. Geometry is frozen,
    so each view's blend weights are computed once.

    Parameters:
        scene (Scene): Geometry to attach the field to (its lang_features are replaced)
        targets (list[FieldTargets]): One entry per training view
        cfg (FieldTrainConfig): Hyperparameters
        level (int): Semantic level tag of the result
        verbose (bool): Show a progress bar

    Returns:
        tuple: (LanguageField with float32-rounded slots, per-iteration loss list)

    Raises:
        DivergenceError when a loss is not finite
    """
    cfg.validate()
    if not targets:
        raise ValueError("train_field needs targets for at least one view")
    N, C = targets[0].num_slots, targets[0].latent_dim
    if any(t.num_slots != N or t.latent_dim != C for t in targets):
        raise ValueError("Every view must provide the same number of slots and latent width")

    weights = [BlendWeights(scene, t.camera) for t in targets]
    features = [np.zeros((len(scene), C)) for _ in range(N)]
    optimizers = [Adam([features[n]], lr=cfg.learning_rate) for n in range(N)]

    rng = rng_for(cfg.seed, "field-order")
    order = []
    losses = []
    bar = tqdm(range(cfg.iterations), desc=f"field level {level}", disable=not verbose, leave=False)
    for it in bar:
        if not order:
            order = list(rng.permutation(len(targets)))
        v = order.pop(0)
        field = LanguageField(scene.with_lang_features(np.stack(features, axis=1)), level)
        grads = field_loss(field, targets[v].camera, targets[v], weights[v])
        if not np.isfinite(grads.loss):
            raise DivergenceError(it, grads.loss, what="iteration")
        for n, opt in enumerate(optimizers):
            opt.step([grads.slots[n].values])
        losses.append(grads.loss)
        if it % 100 == 0:
            bar.set_postfix(loss=f"{grads.loss:.4f}")

    lang = as_f32(np.stack(features, axis=1))
    return LanguageField(scene.with_lang_features(lang), level), losses
