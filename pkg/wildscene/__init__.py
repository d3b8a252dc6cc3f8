"""
wildscene
---------
Synthetic in-the-wild photo collection and pixel-level feature oracle.
"""

from .spec import SceneSpec, load_scene_spec, parse_structured_text, spec_from_dict
from .seeding import derive_seed, rng_for
from .appearance import (AppearanceEmbedding, InsufficientCandidatesError, apply_appearance,
                         manhattan, select_novel_views)
from .generator import (BACKGROUND, TransientRegion, UnconstrainedView, dominant_class_map,
                        gen_scene, gt_mask, render_view, select_novel_appearances, self_render_errors)
from .oracle import FeatureOracle, QueryEmbedding, extract_features

__all__ = ["SceneSpec", "load_scene_spec", "parse_structured_text", "spec_from_dict",
           "derive_seed", "rng_for",
           "AppearanceEmbedding", "InsufficientCandidatesError", "apply_appearance", "manhattan",
           "select_novel_views",
           "BACKGROUND", "TransientRegion", "UnconstrainedView", "dominant_class_map", "gen_scene",
           "gt_mask", "render_view", "select_novel_appearances", "self_render_errors",
           "FeatureOracle", "QueryEmbedding", "extract_features"]
