"""
Segment Module
--------------
Open-vocabulary queries against a trained language field.

Per view: decode the N rendered latent maps, score each against the query,
filter by the background score of the self slot, fuse the N maps with an
ensemble from `scoremaps.catalog`, smooth and threshold. The same fusion on
per-Gaussian scalars gives 3D segmentation; per-image maxima over style
texts give a style vote.
"""

import importlib
import inspect
from collections import Counter

import numpy as np

from langfield.autoencoder import MlpParams, decode, decode_map
from langfield.field import LanguageField
from splatting.core.camera import Camera
from splatting.core.gaussian import Scene
from splatting.raster.rasterizer import BlendWeights

from .base import BaseEnsemble, BoxSmoother
from .relevancy import CanonicalSet, QueryEmbedding, ScoreMap, background_score, relevancy_map, relevancy_scalar

# Path to ready to use ensembles
ENSEMBLES_PATH = "scoremaps.catalog"
TYPE = "type"

DEFAULT_TAU = 0.4
DEFAULT_TAU_3D = 0.6


def resolve_ensemble(ensemble_type: str, params: dict = None) -> type:
    """
    Import an ensemble class from the catalog and validate its parameters.

    Parameters:
        ensemble_type (str): Module name in the catalog (e.g. "weighted")
        params (dict): Arguments for the ensemble's constructor

    Returns:
        type: The ensemble class

    Raises:
        ImportError, ValueError if the module, class or params are invalid
    """
    params = params or {}
    try:
        module = importlib.import_module(f"{ENSEMBLES_PATH}.{ensemble_type}")
    except ModuleNotFoundError:
        raise ImportError(f"Ensemble module '{ENSEMBLES_PATH}.{ensemble_type}' not found")

    # class name is the capitalized module name
    try:
        cls = getattr(module, ensemble_type.capitalize())
    except AttributeError:
        raise ImportError(f"Ensemble class '{ensemble_type}' not found in module")

    valid_keys = set(inspect.signature(cls.__init__).parameters) - {"self", "args", "kwargs"}
    invalid_keys = set(params) - valid_keys
    if invalid_keys:
        raise ValueError(f"Invalid parameters for ensemble '{ensemble_type}': {invalid_keys}")
    return cls


def make_ensemble(config) -> BaseEnsemble:
    """
    Build an ensemble from a name or a {"type": name, **params} dict.
    """
    if isinstance(config, BaseEnsemble):
        return config
    if isinstance(config, str):
        config = {TYPE: config}
    if not isinstance(config, dict) or TYPE not in config:
        raise ValueError(f"Ensemble config must be a name or a dict with a '{TYPE}' field, got {config}")
    params = {k: v for k, v in config.items() if k != TYPE}
    return resolve_ensemble(config[TYPE], params)(**params)


def ensemble(maps: list, bg: ScoreMap = None, strategy="weighted") -> ScoreMap:
    """
    Fuse per-appearance score maps; the default is max-weighted convex fusion.
    """
    return make_ensemble(strategy).fuse(maps, bg)


def smooth(score_map: ScoreMap, kernel: int = 20) -> ScoreMap:
    return BoxSmoother(kernel).smooth(score_map)


def segment2d(fused: ScoreMap, tau: float = DEFAULT_TAU) -> np.ndarray:
    """
    Boolean mask of pixels scoring above tau.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must be in (0, 1), got {tau}")
    return fused.values > tau


def select_level(levels: list) -> int:
    """
    Index of the level whose map has the largest global maximum; ties go to the lowest index.
    """
    if not levels:
        raise ValueError("hierarchical_query needs at least one level")
    return int(np.argmax([m.max() for m in levels]))


def hierarchical_query(levels: list) -> ScoreMap:
    return levels[select_level(levels)]


def decode_slots(field: LanguageField, params: MlpParams, cam: Camera, weights: BlendWeights = None) -> list:
    """
    Render every language slot of a view and decode it to (H, W, D).
    """
    return [decode_map(params, latents) for latents in field.render(cam, weights)]


def query_view(decoded: list, q: QueryEmbedding, canon: CanonicalSet, background_queries: list = None,
               strategy="weighted", kernel: int = 1, level: int = 0) -> ScoreMap:
    """
    Fused, smoothed score map of one query on one view.

    Parameters:
        decoded (list[np.ndarray]): N decoded (H, W, D) maps, self slot last
        q (QueryEmbedding): Query
        canon (CanonicalSet): Contrast phrases
        background_queries (list[QueryEmbedding]): "sky"/"background" texts; None disables the filter
        strategy: Ensemble name, config dict or instance
        kernel (int): Box smoothing kernel (1 disables smoothing)
        level (int): Semantic level tag

    Returns:
        ScoreMap
    """
    maps = [relevancy_map(d, q, canon, slot=n, level=level) for n, d in enumerate(decoded)]
    bg = background_score(decoded[-1], q, background_queries, level) if background_queries else None
    return smooth(ensemble(maps, bg, strategy), kernel)


def gaussian_scores(scene: Scene, params: MlpParams, q: QueryEmbedding, canon: CanonicalSet) -> np.ndarray:
    """
    Fused (G,) relevancy of every Gaussian.

    Each slot's feature is decoded and scored on its own; the slot scores are
    fused with weights proportional to themselves (sum s^2 / sum s). No
    background filter is applied.
    """
    if len(scene) == 0:
        return np.zeros(0)
    scores = np.stack([relevancy_scalar(decode(params, scene.lang_features[:, n, :]), q, canon)
                       for n in range(scene.num_appearance_slots)])
    total = scores.sum(axis=0)
    return np.where(total > 0, np.sum(scores ** 2, axis=0) / np.where(total > 0, total, 1.0), 0.0)


def segment3d(scene: Scene, params: MlpParams, q: QueryEmbedding, canon: CanonicalSet,
              tau: float = DEFAULT_TAU_3D) -> np.ndarray:
    """
    Select Gaussians whose fused relevancy exceeds tau.

    Returns:
        np.ndarray: (G,) boolean mask
    """
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must be in (0, 1), got {tau}")
    return gaussian_scores(scene, params, q, canon) > tau


def hierarchical_segment3d(scenes: list, params: MlpParams, q: QueryEmbedding, canon: CanonicalSet,
                           tau: float = DEFAULT_TAU_3D) -> tuple:
    """
    3D selection on the semantic level whose Gaussians score highest.

    Parameters:
        scenes (list[Scene]): One field per level, sharing geometry

    Returns:
        tuple: (chosen level, (G,) boolean mask); ties go to the lowest level
    """
    if not scenes:
        raise ValueError("hierarchical_segment3d needs at least one level")
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must be in (0, 1), got {tau}")
    scores = [gaussian_scores(s, params, q, canon) for s in scenes]
    level = int(np.argmax([s.max() if s.size else 0.0 for s in scores]))
    return level, scores[level] > tau


def style_votes(maps: dict) -> list:
    """
    Per image, the style whose map has the largest global maximum.

    Parameters:
        maps (dict): style label -> list of fused ScoreMaps, one per image

    Returns:
        list[str]: Vote per image (ties to the lexicographically first style)
    """
    if not maps:
        raise ValueError("style_vote needs at least one style")
    styles = sorted(maps)
    counts = {len(maps[s]) for s in styles}
    if len(counts) != 1 or counts == {0}:
        raise ValueError("Every style needs one map per image and at least one image")

    votes = []
    for i in range(counts.pop()):
        peaks = [maps[s][i].max() for s in styles]
        votes.append(styles[int(np.argmax(peaks))])
    return votes


def style_vote(maps: dict) -> str:
    """
    Winner-takes-all style: the most frequent per-image vote, ties broken lexicographically.
    """
    tally = Counter(style_votes(maps))
    best = max(tally.values())
    return min(s for s, n in tally.items() if n == best)
