"""
pipeline.py
-----------
Stage-by-stage execution of the open-vocabulary segmentation pipeline.

    gen -> features -> uncertainty -> train-ae -> targets -> train-field -> query -> eval

Every stage writes its artifacts to `<out>/cache/<stage>-<hash16>/`, where the
hash covers the config fields the stage reads and the hashes of the stages it
consumes. A stage directory is complete once its DONE marker exists; reruns
with the same config reuse it. Stages only ever read their inputs back from
disk, so cached and fresh runs produce identical bytes.

Usage:
    python -m wild_ovs.cli eval --config configs/clean.json --verbose
"""

import csv
import hashlib
import json
import os
import shutil
import time
from dataclasses import dataclass, field

import numpy as np
from tqdm import tqdm

from langfield.autoencoder import (AeTrainConfig, load_params, save_loss_curve, save_params,
                                   train_ae, training_set)
from langfield.field import FieldTargets, FieldTrainConfig, LanguageField, build_targets, train_field
from langfield.uncertainty import (APPEARANCE, TRANSIENT, UncertaintyMap, appearance_uncertainty,
                                   normalize_maps, transient_uncertainty)
from scoremaps.relevancy import CanonicalSet
from scoremaps.segment import (decode_slots, hierarchical_query, hierarchical_segment3d, make_ensemble, query_view,
                               segment2d, style_vote, style_votes)
from splatting.core.camera import Camera
from splatting.core.scene_io import load_scene, save_scene
from splatting.raster.feature_map import FeatureMap
from splatting.raster.rasterizer import BlendWeights
from splatting.raster.tensor_io import load_tensor, save_png, save_tensor
from wildscene.appearance import AppearanceEmbedding, select_novel_views
from wildscene.generator import TransientRegion, UnconstrainedView, gen_scene, gt_mask, self_render_errors
from wildscene.oracle import FeatureOracle, extract_features

from .config import ConfigError, PipelineConfig
from .metrics import QueryMetrics, SegMetrics, average, metrics, summarize

STAGES = ("gen", "features", "uncertainty", "train-ae", "targets", "train-field", "query", "eval")

DONE = "DONE"
CACHE_DIR = "cache"
REPORT = "report.csv"
STYLE_TARGET = "style"

# scene fields that only the oracle and the selection read
ORACLE_FIELDS = {"sigma_a", "eps_q", "eps_d", "levels", "styles", "true_style"}


class StageError(RuntimeError):
    """
    Wraps any failure inside a pipeline stage with the stage name.
    """

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"Stage '{stage}' failed: {type(cause).__name__}: {cause}")


def log(msg, verbose=False):
    """
    Print a message if verbose mode is True.
    """
    if verbose:
        tqdm.write(msg)


def config_hash(payload: dict) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode("utf-8")).hexdigest()[:16]


class StageCache:
    """
    Content-addressed stage directories under `<out>/cache`.
    """

    def __init__(self, out: str, verbose: bool = False):
        self.root = os.path.join(out, CACHE_DIR)
        self.verbose = verbose

    def path(self, stage: str, key: str) -> str:
        return os.path.join(self.root, f"{stage}-{key}")

    def is_done(self, stage: str, key: str) -> bool:
        return os.path.exists(os.path.join(self.path(stage, key), DONE))

    def run(self, stage: str, payload: dict, build) -> tuple:
        """
        Run build(directory) unless a complete directory for this payload exists.

        Returns:
            tuple: (stage key, stage directory)

        Raises:
            StageError wrapping any exception raised by build
        """
        key = config_hash({"stage": stage, **payload})
        directory = self.path(stage, key)
        if self.is_done(stage, key):
            log(f"[{stage}] reusing {directory}", self.verbose)
            return key, directory

        if os.path.exists(directory):
            shutil.rmtree(directory)
        os.makedirs(directory)

        log(f"[{stage}] computing into {directory}", self.verbose)
        t0 = time.time()
        try:
            build(directory)
        except Exception as e:
            raise StageError(stage, e) from e

        marker = os.path.join(directory, DONE)
        with open(f"{marker}.tmp", "w", encoding="utf-8") as f:
            f.write(key)
        os.replace(f"{marker}.tmp", marker)
        log(f"[{stage}] took {time.time() - t0:.3f} seconds!", self.verbose)
        return key, directory


@dataclass(frozen=True)
class Query:
    """
    One line of a query file: text label and either an object class id or the style marker.
    """
    label: str
    class_id: int = None

    @property
    def is_style(self) -> bool:
        return self.class_id is None


def parse_queries(text: str) -> list:
    """
    Parse `label<TAB>class_id` or `label<TAB>style` lines (`#` starts a comment).

    Raises:
        ConfigError on malformed lines
    """
    queries = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0].strip():
            raise ConfigError(f"Query line {lineno}: expected 'label<TAB>class_id|style', got '{line}'")
        label, target = parts[0].strip(), parts[1].strip()
        if target == STYLE_TARGET:
            queries.append(Query(label))
        elif target.isdigit():
            queries.append(Query(label, int(target)))
        else:
            raise ConfigError(f"Query line {lineno}: target must be a class id or '{STYLE_TARGET}', got '{target}'")
    return queries


def resolve_queries(cfg: PipelineConfig) -> list:
    """
    Queries of a config: a query file, an inline [[label, target], ...] list,
    or by default every object class by name.
    """
    scene = cfg.scene()
    if cfg.queries is None:
        queries = [Query(name, k) for k, name in enumerate(scene.class_names)]
        return queries + [Query(s) for s in scene.styles]
    if isinstance(cfg.queries, str):
        if not os.path.exists(cfg.queries):
            raise FileNotFoundError(f"Query file '{cfg.queries}' not found")
        with open(cfg.queries, "r", encoding="utf-8") as f:
            queries = parse_queries(f.read())
    else:
        queries = parse_queries("\n".join(f"{label}\t{target}" for label, target in cfg.queries))

    for q in queries:
        if not q.is_style and q.class_id >= scene.num_classes:
            raise ConfigError(f"Query '{q.label}' targets class {q.class_id}, scene has {scene.num_classes}")
    return queries


# ----------------------------------------------------------------------------
# persisted artifacts


def _view_file(directory: str, kind: str, *parts) -> str:
    return os.path.join(directory, "_".join([kind] + [str(p) for p in parts]) + ".mft")


def _write_json(path: str, data):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, sort_keys=True, indent=1)


def _read_json(path: str):
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def save_world(directory: str, scene, views: list):
    save_scene(os.path.join(directory, "scene.mgs"), scene)
    _write_json(os.path.join(directory, "scene.json"),
                {"appearance_dim": scene.appearance_dim, "D": scene.feature_dim_high, "views": len(views)})
    for v in views:
        _write_json(os.path.join(directory, f"view_{v.index}.json"), {
            "index": v.index,
            "camera": v.camera.to_dict(),
            "appearance": v.appearance.vector.tolist(),
            "transient_regions": [r.to_dict() for r in v.transient_regions],
        })
        save_tensor(_view_file(directory, "image", v.index), v.image)
        save_tensor(_view_file(directory, "labels", v.index), v.label_map)
        save_png(os.path.join(directory, f"image_{v.index}.png"), v.image)


def load_world(directory: str) -> tuple:
    """
    Read back the scene and views written by the gen stage.
    """
    meta = _read_json(os.path.join(directory, "scene.json"))
    scene = load_scene(os.path.join(directory, "scene.mgs"), meta["appearance_dim"], meta["D"])
    views = []
    for i in range(meta["views"]):
        data = _read_json(os.path.join(directory, f"view_{i}.json"))
        views.append(UnconstrainedView(
            index=data["index"],
            camera=Camera.from_dict(data["camera"]),
            appearance=AppearanceEmbedding(np.array(data["appearance"])),
            transient_regions=tuple(TransientRegion(**r) for r in data["transient_regions"]),
            image=load_tensor(_view_file(directory, "image", i)),
            label_map=load_tensor(_view_file(directory, "labels", i), squeeze=True).astype(np.int64),
        ))
    return scene, views


def load_features(directory: str, kind: str, view: int, level: int, slot: int = None) -> FeatureMap:
    parts = (view, slot, f"L{level}") if slot is not None else (view, f"L{level}")
    return FeatureMap.load(_view_file(directory, kind, *parts), tag=kind)


def novel_feature_maps(directory: str, view: int, level: int) -> list:
    """
    The N language-feature maps of a view in slot order (novel appearances, then self).
    """
    novel = _read_json(os.path.join(directory, "appearances.json"))["novel"]
    maps = [load_features(directory, "novel", view, level, j) for j in range(len(novel))]
    return maps + [load_features(directory, "self", view, level)]


def load_uncertainty(directory: str, kind: str, view: int, level: int) -> UncertaintyMap:
    name = "u_a" if kind == APPEARANCE else "u_t"
    values = load_tensor(_view_file(directory, name, view, f"L{level}"), squeeze=True)
    return UncertaintyMap(values, kind, normalized=True, level=level)


# ----------------------------------------------------------------------------
# stages


@dataclass
class PipelineState:
    """
    Stage keys and directories produced so far.
    """
    cfg: PipelineConfig
    keys: dict = field(default_factory=dict)
    dirs: dict = field(default_factory=dict)

    @property
    def spec(self):
        return self.cfg.scene()

    def oracle(self) -> FeatureOracle:
        return FeatureOracle.from_spec(self.spec)


def _stage_gen(state: PipelineState, cache: StageCache):
    spec = state.spec
    payload = {"scene": {k: v for k, v in spec.to_dict().items() if k not in ORACLE_FIELDS}}

    def build(directory):
        scene, views = gen_scene(spec)
        save_world(directory, scene, views)

    return cache.run("gen", payload, build)


def _stage_features(state: PipelineState, cache: StageCache):
    spec = state.spec
    payload = {"gen": state.keys["gen"], "scene": spec.to_dict()}

    def build(directory):
        scene, views = load_world(state.dirs["gen"])
        novel_views = select_novel_views(self_render_errors(scene, views), [v.appearance for v in views],
                                         spec.N - 1, spec.eps_q, spec.eps_d)
        novel = [views[i].appearance for i in novel_views]
        _write_json(os.path.join(directory, "appearances.json"), {"novel": novel_views})
        log(f"[features] novel appearances from views {novel_views}", cache.verbose)

        oracle = state.oracle()
        for v in views:
            for level in range(spec.levels):
                extract_features(oracle, scene, v, v.appearance, True, level).save(
                    _view_file(directory, "original", v.index, f"L{level}"))
                extract_features(oracle, scene, v, v.appearance, False, level).save(
                    _view_file(directory, "self", v.index, f"L{level}"))
                for j, a in enumerate(novel):
                    extract_features(oracle, scene, v, a, False, level).save(
                        _view_file(directory, "novel", v.index, j, f"L{level}"))

    return cache.run("features", payload, build)


def _stage_uncertainty(state: PipelineState, cache: StageCache):
    spec = state.spec
    payload = {"features": state.keys["features"]}

    def build(directory):
        features = state.dirs["features"]
        for level in range(spec.levels):
            u_a, u_t = [], []
            for i in range(spec.views):
                u_a.append(appearance_uncertainty(novel_feature_maps(features, i, level), level))
                u_t.append(transient_uncertainty(load_features(features, "self", i, level),
                                                 load_features(features, "original", i, level), level))
            for name, maps in (("u_a", normalize_maps(u_a)), ("u_t", normalize_maps(u_t))):
                for i, m in enumerate(maps):
                    save_tensor(_view_file(directory, name, i, f"L{level}"), m.values)
                    save_png(os.path.join(directory, f"{name}_{i}_L{level}.png"), m.values)

    return cache.run("uncertainty", payload, build)


def _ae_config(cfg: PipelineConfig) -> AeTrainConfig:
    return AeTrainConfig(epochs=cfg.ae_epochs, learning_rate=cfg.ae_learning_rate, batch_size=cfg.ae_batch_size,
                         seed=cfg.seed, tau_u=cfg.tau_u, hidden=list(cfg.ae_hidden))


def _stage_train_ae(state: PipelineState, cache: StageCache):
    cfg, spec = state.cfg, state.spec
    ae_cfg = _ae_config(cfg)
    payload = {"features": state.keys["features"], "uncertainty": state.keys["uncertainty"],
               "ae": vars(ae_cfg), "C": spec.C, "stride": cfg.ae_pixel_stride,
               "use_uncertainty": cfg.ae_use_uncertainty, "all_appearances": cfg.ae_all_appearances}

    def build(directory):
        features, uncertainty = state.dirs["features"], state.dirs["uncertainty"]
        samples, weights = [], []
        for level in range(spec.levels):
            maps = [load_features(features, "original", i, level).values for i in range(spec.views)]
            u_t = None
            if cfg.ae_use_uncertainty:
                u_t = [load_uncertainty(uncertainty, TRANSIENT, i, level) for i in range(spec.views)]
            x, w = training_set(maps, u_t, cfg.tau_u, cfg.ae_pixel_stride)
            samples.append(x)
            weights.append(w)
            if cfg.ae_all_appearances:
                extra = [m.values for i in range(spec.views) for m in novel_feature_maps(features, i, level)]
                x, w = training_set(extra, None, cfg.tau_u, cfg.ae_pixel_stride)
                samples.append(x)
                weights.append(w)

        samples, weights = np.concatenate(samples), np.concatenate(weights)
        log(f"[train-ae] {samples.shape[0]} samples, D = {samples.shape[1]}", cache.verbose)
        params, curve = train_ae(samples, weights, ae_cfg, spec.C, verbose=cache.verbose)
        save_params(os.path.join(directory, "params.mae"), params)
        save_loss_curve(os.path.join(directory, "loss.csv"), curve)

    return cache.run("train-ae", payload, build)


def _stage_targets(state: PipelineState, cache: StageCache):
    cfg, spec = state.cfg, state.spec
    payload = {"train-ae": state.keys["train-ae"], "features": state.keys["features"],
               "uncertainty": state.keys["uncertainty"], "use_aum": cfg.use_aum, "use_tum": cfg.use_tum}

    def build(directory):
        scene, views = load_world(state.dirs["gen"])
        params = load_params(os.path.join(state.dirs["train-ae"], "params.mae"))
        for level in range(spec.levels):
            for v in views:
                u_a = load_uncertainty(state.dirs["uncertainty"], APPEARANCE, v.index, level)
                u_t = load_uncertainty(state.dirs["uncertainty"], TRANSIENT, v.index, level)
                if not cfg.use_aum:
                    u_a = UncertaintyMap.zeros(u_a.shape, APPEARANCE, level)
                if not cfg.use_tum:
                    u_t = UncertaintyMap.zeros(u_t.shape, TRANSIENT, level)

                targets = build_targets(params, novel_feature_maps(state.dirs["features"], v.index, level),
                                        u_a, u_t, v.camera)
                for n, latent in enumerate(targets.latents):
                    save_tensor(_view_file(directory, "latent", v.index, n, f"L{level}"), latent)
                save_tensor(_view_file(directory, "u_a", v.index, f"L{level}"), u_a.values)
                save_tensor(_view_file(directory, "u_t", v.index, f"L{level}"), u_t.values)

    return cache.run("targets", payload, build)


def load_targets(directory: str, views: list, level: int, num_slots: int) -> list:
    targets = []
    for v in views:
        latents = [load_tensor(_view_file(directory, "latent", v.index, n, f"L{level}")) for n in range(num_slots)]
        targets.append(FieldTargets(v.camera, latents, load_uncertainty(directory, APPEARANCE, v.index, level),
                                    load_uncertainty(directory, TRANSIENT, v.index, level)))
    return targets


def _stage_train_field(state: PipelineState, cache: StageCache):
    cfg, spec = state.cfg, state.spec
    field_cfg = FieldTrainConfig(iterations=cfg.field_iterations, learning_rate=cfg.field_learning_rate, seed=cfg.seed)
    payload = {"targets": state.keys["targets"], "field": vars(field_cfg)}

    def build(directory):
        scene, views = load_world(state.dirs["gen"])
        for level in range(spec.levels):
            targets = load_targets(state.dirs["targets"], views, level, spec.N)
            trained, losses = train_field(scene, targets, field_cfg, level, verbose=cache.verbose)
            trained.save(os.path.join(directory, f"field_L{level}"))
            with open(os.path.join(directory, f"loss_L{level}.csv"), "w", newline="", encoding="utf-8") as f:
                writer = csv.writer(f)
                writer.writerow(["iteration", "loss"])
                writer.writerows([i, repr(float(loss))] for i, loss in enumerate(losses))

    return cache.run("train-field", payload, build)


def load_fields(state: PipelineState) -> list:
    spec = state.spec
    return [LanguageField.load(os.path.join(state.dirs["train-field"], f"field_L{level}"),
                               spec.d_a, spec.D, level) for level in range(spec.levels)]


def _query_payload(state: PipelineState, queries: list) -> dict:
    cfg = state.cfg
    return {"train-field": state.keys["train-field"], "train-ae": state.keys["train-ae"],
            "scene": state.spec.to_dict(), "queries": [[q.label, q.class_id] for q in queries],
            "tau": cfg.tau, "kernel": cfg.smooth_kernel, "ensemble": cfg.ensemble,
            "background_filter": cfg.background_filter}


def fused_maps(state: PipelineState, queries: list) -> dict:
    """
    Fused score map per (query index, view index), choosing the best semantic level.
    """
    cfg = state.cfg
    _, views = load_world(state.dirs["gen"])
    params = load_params(os.path.join(state.dirs["train-ae"], "params.mae"))
    fields = load_fields(state)
    oracle = state.oracle()
    canon = CanonicalSet.from_oracle(oracle)
    background = oracle.background_queries() if cfg.background_filter else None
    strategy = make_ensemble(cfg.ensemble)
    embeddings = [oracle.query(q.label) for q in queries]

    out = {}
    for v in views:
        weights = BlendWeights(fields[0].scene, v.camera)
        decoded = [decode_slots(f, params, v.camera, weights) for f in fields]
        for k, q in enumerate(embeddings):
            per_level = [query_view(decoded[level], q, canon, background, strategy, cfg.smooth_kernel, level)
                         for level in range(len(fields))]
            out[(k, v.index)] = hierarchical_query(per_level)
    return out


def _stage_query(state: PipelineState, cache: StageCache):
    queries = [q for q in resolve_queries(state.cfg) if not q.is_style]
    if not queries:
        raise StageError("query", ConfigError("No class queries to evaluate"))

    def build(directory):
        _write_json(os.path.join(directory, "queries.json"), [[q.label, q.class_id] for q in queries])
        for (k, i), fused in fused_maps(state, queries).items():
            mask = segment2d(fused, state.cfg.tau)
            save_tensor(_view_file(directory, "score", k, i), fused.values)
            save_tensor(_view_file(directory, "mask", k, i), mask)
            save_png(os.path.join(directory, f"mask_{k}_{i}.png"), mask)

    return cache.run("query", _query_payload(state, queries), build)


def evaluate(query_dir: str, views: list) -> SegMetrics:
    """
    Metrics of the persisted masks against ground truth, ignoring occluded pixels.
    """
    queries = _read_json(os.path.join(query_dir, "queries.json"))
    per_query = {}
    for k, (label, class_id) in enumerate(queries):
        results = []
        for v in views:
            pred = load_tensor(_view_file(query_dir, "mask", k, v.index), squeeze=True) > 0.5
            results.append(metrics(pred, gt_mask(v, class_id), valid=~v.transient_mask()))
        per_query[label] = average(results)
    return summarize(per_query)


def write_report(path: str, result: SegMetrics):
    """
    CSV with one row per query and a final row of means.
    """
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["query", "iou", "pa", "p"])
        for label, m in result.per_query.items():
            writer.writerow([label, f"{m.iou:.6f}", f"{m.pa:.6f}", f"{m.p:.6f}"])
        writer.writerow(["mean", f"{result.miou:.6f}", f"{result.mpa:.6f}", f"{result.mp:.6f}"])


def _stage_eval(state: PipelineState, cache: StageCache):
    payload = {"query": state.keys["query"]}

    def build(directory):
        _, views = load_world(state.dirs["gen"])
        write_report(os.path.join(directory, REPORT), evaluate(state.dirs["query"], views))

    return cache.run("eval", payload, build)


STAGE_FUNCTIONS = {
    "gen": _stage_gen,
    "features": _stage_features,
    "uncertainty": _stage_uncertainty,
    "train-ae": _stage_train_ae,
    "targets": _stage_targets,
    "train-field": _stage_train_field,
    "query": _stage_query,
    "eval": _stage_eval,
}


def read_report(path: str) -> SegMetrics:
    with open(path, "r", newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))[1:]
    per_query = {r[0]: QueryMetrics(float(r[1]), float(r[2]), float(r[3])) for r in rows[:-1]}
    mean = rows[-1]
    return SegMetrics(float(mean[1]), float(mean[2]), float(mean[3]), per_query)


@dataclass
class PipelineResult:
    """
    Parameters:
        dirs (dict): stage -> artifact directory
        report (str): Path of the report CSV (None unless eval ran)
        metrics (SegMetrics): Parsed report (None unless eval ran)
    """
    dirs: dict
    report: str = None
    metrics: SegMetrics = None


def run_stages(cfg: PipelineConfig, until: str = "eval", verbose: bool = False) -> PipelineState:
    """
    Run (or reuse) every stage up to and including `until`.

    Raises:
        StageError naming the failing stage
    """
    if until not in STAGES:
        raise ConfigError(f"Unknown stage '{until}', expected one of {STAGES}")
    state = PipelineState(cfg)
    cache = StageCache(cfg.out, verbose)
    log(f"Running pipeline up to '{until}' into {cfg.out}", verbose)
    for stage in STAGES[:STAGES.index(until) + 1]:
        state.keys[stage], state.dirs[stage] = STAGE_FUNCTIONS[stage](state, cache)
    return state


def run_pipeline(cfg: PipelineConfig, until: str = "eval", verbose: bool = False) -> PipelineResult:
    """
    Execute the pipeline and copy the report to `<out>/report.csv`.

    Parameters:
        cfg (PipelineConfig): Validated config
        until (str): Last stage to run
        verbose (bool): Enable logging

    Returns:
        PipelineResult
    """
    t0 = time.time()
    state = run_stages(cfg, until, verbose)
    result = PipelineResult(dict(state.dirs))
    if until == "eval":
        result.report = os.path.join(cfg.out, REPORT)
        shutil.copyfile(os.path.join(state.dirs["eval"], REPORT), result.report)
        result.metrics = read_report(result.report)
        log(f"mIoU {result.metrics.miou:.4f}  mPA {result.metrics.mpa:.4f}  mP {result.metrics.mp:.4f}", verbose)
    log(f"pipeline took {time.time() - t0:.3f} seconds!", verbose)
    return result


def run_style_vote(cfg: PipelineConfig, verbose: bool = False) -> str:
    """
    Vote for the scene's style among the style queries and write `<out>/style_vote.csv`.

    Returns:
        str: Winning style label
    """
    styles = [q for q in resolve_queries(cfg) if q.is_style]
    if not styles:
        raise ConfigError("No style queries: set 'styles' or list '<label>\\tstyle' lines in the query file")
    state = run_stages(cfg, "train-field", verbose)
    try:
        fused = fused_maps(state, styles)
        maps = {q.label: [fused[(k, v)] for v in range(cfg.scene().views)] for k, q in enumerate(styles)}
        votes, winner = style_votes(maps), style_vote(maps)
    except Exception as e:
        raise StageError("style-vote", e) from e

    path = os.path.join(cfg.out, "style_vote.csv")
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["view", "vote"])
        writer.writerows(enumerate(votes))
        writer.writerow(["winner", winner])
    log(f"style vote: {winner} ({path})", verbose)
    return winner


def run_seg3d(cfg: PipelineConfig, verbose: bool = False) -> dict:
    """
    Select Gaussians per class query and write masks plus `<out>/seg3d/seg3d.csv`.

    With several semantic levels each query uses the level whose Gaussians
    score highest, mirroring the 2D level choice.

    Returns:
        dict: query label -> (G,) boolean mask
    """
    queries = [q for q in resolve_queries(cfg) if not q.is_style]
    state = run_stages(cfg, "train-field", verbose)
    directory = os.path.join(cfg.out, "seg3d")
    os.makedirs(directory, exist_ok=True)
    try:
        params = load_params(os.path.join(state.dirs["train-ae"], "params.mae"))
        scenes = [f.scene for f in load_fields(state)]
        oracle = state.oracle()
        canon = CanonicalSet.from_oracle(oracle)
        chosen = {q.label: hierarchical_segment3d(scenes, params, oracle.query(q.label), canon, cfg.tau_3d)
                  for q in queries}
        masks = {label: mask for label, (_, mask) in chosen.items()}
    except Exception as e:
        raise StageError("seg3d", e) from e

    with open(os.path.join(directory, "seg3d.csv"), "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["query", "level", "selected", "class_gaussians", "precision", "recall"])
        for k, q in enumerate(queries):
            mask = masks[q.label]
            truth = scenes[0].class_ids == q.class_id
            tp = int(np.sum(mask & truth))
            precision = tp / int(mask.sum()) if mask.any() else 0.0
            recall = tp / int(truth.sum()) if truth.any() else 1.0
            writer.writerow([q.label, chosen[q.label][0], int(mask.sum()), int(truth.sum()),
                             f"{precision:.6f}", f"{recall:.6f}"])
            save_tensor(os.path.join(directory, f"mask_{k}.mft"), mask.reshape(1, -1, 1))
    log(f"3D segmentation written to {directory}", verbose)
    return masks
