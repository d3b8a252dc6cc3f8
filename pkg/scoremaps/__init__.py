"""
scoremaps
---------
Relevancy scoring, score-map ensembles and segmentation queries.
"""

from .relevancy import (CanonicalSet, QueryEmbedding, ScoreMap, relevancy_map, relevancy_scalar,
                        background_score)
from .base import *
from .catalog import *
from .segment import (resolve_ensemble, make_ensemble, ensemble, smooth, segment2d, select_level,
                      hierarchical_query, decode_slots, query_view, gaussian_scores, segment3d,
                      hierarchical_segment3d, style_votes, style_vote)

__all__ = (["CanonicalSet", "QueryEmbedding", "ScoreMap", "relevancy_map", "relevancy_scalar",
            "background_score"]
           + base.__all__ + catalog.__all__
           + ["resolve_ensemble", "make_ensemble", "ensemble", "smooth", "segment2d", "select_level",
              "hierarchical_query", "decode_slots", "query_view", "gaussian_scores", "segment3d",
              "hierarchical_segment3d", "style_votes", "style_vote"])
