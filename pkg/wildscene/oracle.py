"""
Oracle Module
-------------
Synthetic stand-in for a pixel-level vision-language feature extractor.

Every concept (object classes, occluder classes, background, sky and the
canonical texts) has a unit D-vector. A pixel's feature is its dominant
class embedding perturbed by appearance-dependent noise that is constant
over 8 x 8 pixel blocks (superpixel granularity):

    F(p) = normalize(e_class + sigma_a * eta(appearance, class, block(p)))

eta lives in the span of the scene's semantic embeddings (object classes
and background), so appearance changes confuse the extractor between
concepts of the scene. Occluders emit their clean class embedding and
background pixels the background embedding.
"""

from dataclasses import dataclass

import numpy as np

from splatting.core.gaussian import Scene
from splatting.raster.feature_map import FeatureMap

from .appearance import AppearanceEmbedding
from .generator import BACKGROUND, UnconstrainedView, dominant_class_map
from .seeding import rng_for
from .spec import SceneSpec

BLOCK_SIZE = 8
COSINE_CAP = 0.3
MAX_RESAMPLES = 10000

CANONICAL_TEXTS = ("object", "things", "scene", "sky", "building")
BACKGROUND_TEXT = "background"
SKY_TEXT = "sky"


def _draw_unit_set(count: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """
    Draw `count` unit vectors with pairwise cosine <= COSINE_CAP.

    Orthonormal when dim allows, otherwise each vector is resampled until it
    respects the cap against all earlier ones.
    """
    if dim >= count:
        q, r = np.linalg.qr(rng.standard_normal((dim, count)))
        # fix column signs so the draw is a deterministic function of the rng
        return (q * np.sign(np.diag(r))).T

    accepted = []
    for _ in range(count):
        for _attempt in range(MAX_RESAMPLES):
            v = rng.standard_normal(dim)
            v /= np.linalg.norm(v)
            if all(v @ u <= COSINE_CAP for u in accepted):
                accepted.append(v)
                break
        else:
            raise ValueError(f"Could not place {count} embeddings in {dim} dims with cosine <= {COSINE_CAP}")
    return np.array(accepted)


def _normalize_rows(x: np.ndarray) -> np.ndarray:
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


@dataclass(frozen=True)
class QueryEmbedding:
    """
    Text-side embedding of a query label.

    Parameters:
        vector (np.ndarray): Unit D-vector
        label (str): Query text
    """
    vector: np.ndarray
    label: str = ""

    def __post_init__(self):
        vector = np.array(self.vector, dtype=np.float64).reshape(-1)
        if abs(np.linalg.norm(vector) - 1.0) > 1e-6:
            raise ValueError(f"Query embedding '{self.label}' is not unit norm")
        vector.flags.writeable = False
        object.__setattr__(self, "vector", vector)

    @property
    def dim(self) -> int:
        return self.vector.shape[0]


@dataclass(frozen=True)
class FeatureOracle:
    """
    Parameters:
        class_embeddings (dict): class_id -> unit D-vector (objects and occluders)
        class_names (dict): class_id -> text label
        text_embeddings (dict): "background", "sky", canonical texts and styles -> unit D-vector
        num_object_classes (int): Object ids are 0 .. K-1, occluder ids follow
        appearance_noise_scale (float): sigma_a
        seed (int): Seed of the noise streams
    """
    class_embeddings: dict
    class_names: dict
    text_embeddings: dict
    num_object_classes: int
    appearance_noise_scale: float
    seed: int

    def __post_init__(self):
        if self.appearance_noise_scale < 0:
            raise ValueError(f"sigma_a must be >= 0, got {self.appearance_noise_scale}")
        for cid, e in self.class_embeddings.items():
            if abs(np.linalg.norm(e) - 1.0) > 1e-9:
                raise ValueError(f"Embedding of class {cid} is not unit norm")

    @classmethod
    def create(cls, class_names: list, num_transient_classes: int, dim: int,
               sigma_a: float, seed: int, styles: list = (), true_style: str = None) -> "FeatureOracle":
        """
        Build an oracle for K object classes and T occluder classes.

        Parameters:
            class_names (list[str]): Object class labels (ids follow list order)
            num_transient_classes (int): Occluder classes, ids K .. K+T-1
            dim (int): D
            sigma_a (float): Appearance noise scale
            seed (int): Seed for embeddings and noise
            styles (list[str]): Style candidates
            true_style (str): Style whose embedding aligns with the scene's objects
        """
        K, T = len(class_names), num_transient_classes
        texts = [BACKGROUND_TEXT] + [t for t in CANONICAL_TEXTS]
        vectors = _draw_unit_set(K + T + len(texts), dim, rng_for(seed, "embeddings"))

        class_embeddings = {k: vectors[k] for k in range(K + T)}
        names = {k: name for k, name in enumerate(class_names)}
        names.update({K + t: f"transient_{t}" for t in range(T)})
        text_embeddings = {t: vectors[K + T + i] for i, t in enumerate(texts)}

        object_mean = _normalize_rows(vectors[:K].sum(axis=0))
        for style in styles:
            if style == true_style:
                text_embeddings[style] = object_mean
            else:
                v = rng_for(seed, "style", style).standard_normal(dim)
                text_embeddings[style] = v / np.linalg.norm(v)

        return cls(class_embeddings, names, text_embeddings, K, sigma_a, seed)

    @classmethod
    def from_spec(cls, spec: SceneSpec) -> "FeatureOracle":
        return cls.create(spec.class_names, spec.num_transient_classes, spec.D, spec.sigma_a,
                          spec.seed, spec.styles, spec.true_style)

    @property
    def dim(self) -> int:
        return self.background.shape[0]

    @property
    def background(self) -> np.ndarray:
        return self.text_embeddings[BACKGROUND_TEXT]

    @property
    def object_classes(self) -> list:
        return list(range(self.num_object_classes))

    def class_id(self, name: str) -> int:
        for cid, label in self.class_names.items():
            if label == name:
                return cid
        raise ValueError(f"Unknown class '{name}'")

    def level_embedding(self, class_id: int, level: int) -> np.ndarray:
        """
        Embedding of a class at a semantic level: level l merges object
        classes k with equal k // 2**l into one group.
        """
        if class_id >= self.num_object_classes or level == 0:
            return self.class_embeddings[class_id]
        group = class_id // (2 ** level)
        members = [k for k in self.object_classes if k // (2 ** level) == group]
        if len(members) == 1:
            return self.class_embeddings[class_id]
        return _normalize_rows(np.sum([self.class_embeddings[k] for k in members], axis=0))

    def noise_basis(self) -> np.ndarray:
        """
        Orthonormal basis of the span of object-class and background embeddings.
        """
        vectors = np.array([self.class_embeddings[k] for k in self.object_classes] + [self.background])
        q, _ = np.linalg.qr(vectors.T)
        return q.T

    def query(self, label: str) -> QueryEmbedding:
        """
        Text embedding for class names, "background", "sky", canonical texts and styles.
        """
        if label in self.text_embeddings:
            return QueryEmbedding(self.text_embeddings[label], label)
        for cid, name in self.class_names.items():
            if name == label:
                return QueryEmbedding(self.class_embeddings[cid], label)
        raise ValueError(f"Oracle has no embedding for '{label}'")

    def canonical_set(self) -> list:
        return [self.query(t) for t in CANONICAL_TEXTS]

    def background_queries(self) -> list:
        return [self.query(SKY_TEXT), self.query(BACKGROUND_TEXT)]

    def block_noise(self, appearance: AppearanceEmbedding, view: UnconstrainedView,
                     level: int) -> np.ndarray:
        H, W = view.shape
        hb, wb = -(-H // BLOCK_SIZE), -(-W // BLOCK_SIZE)
        basis = self.noise_basis()
        rng = rng_for(self.seed, "noise", appearance.key(),
                      view.camera.extrinsic.astype("<f8").tobytes(), level)
        z = rng.standard_normal((self.num_object_classes, hb, wb, basis.shape[0]))
        return z @ basis / np.sqrt(basis.shape[0])


def extract_features(oracle: FeatureOracle, scene: Scene, view: UnconstrainedView,
                     appearance: AppearanceEmbedding, include_transients: bool,
                     level: int = 0, tag: str = "") -> FeatureMap:
    """
    Pixel-level language features of a view rendered under an appearance.

    Parameters:
        oracle (FeatureOracle): Feature extractor stand-in
        scene (Scene): Scene providing the dominant class per pixel
        view (UnconstrainedView): Camera and occluders
        appearance (AppearanceEmbedding): Appearance the view is rendered with
        include_transients (bool): Emit occluder features inside their rectangles
        level (int): Semantic level
        tag (str): Provenance tag of the result

    Returns:
        FeatureMap: (H, W, D)

    Raises:
        ValueError when the scene holds a class the oracle does not know
    """
    unknown = set(int(c) for c in np.unique(scene.class_ids)) - set(oracle.object_classes)
    if unknown:
        raise ValueError(f"Oracle does not cover scene classes {sorted(unknown)}")

    H, W = view.shape
    labels = dominant_class_map(scene, view.camera)
    out = np.empty((H, W, oracle.dim), dtype=np.float64)
    out[labels == BACKGROUND] = oracle.background

    table = np.array([oracle.level_embedding(k, level) for k in oracle.object_classes])
    obj = labels != BACKGROUND
    features = table[labels[obj]]

    if oracle.appearance_noise_scale > 0:
        noise = oracle.block_noise(appearance, view, level)
        ys, xs = np.nonzero(obj)
        features = _normalize_rows(features + oracle.appearance_noise_scale *
                                   noise[labels[obj], ys // BLOCK_SIZE, xs // BLOCK_SIZE])
    out[obj] = features

    if include_transients:
        for r in view.transient_regions:
            if r.class_id not in oracle.class_embeddings:
                raise ValueError(f"Oracle does not know occluder class {r.class_id}")
            out[r.y0:r.y1, r.x0:r.x1] = oracle.class_embeddings[r.class_id]

    return FeatureMap(out, tag)
