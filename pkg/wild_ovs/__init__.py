"""
wild_ovs
--------
Pipeline configuration, segmentation metrics, the stage-cached pipeline,
ablations and the command-line tool.
"""

from .config import ConfigError, PipelineConfig, load_config, config_from_dict
from .metrics import QueryMetrics, SegMetrics, metrics, average, summarize
from .pipeline import (STAGES, StageError, StageCache, Query, parse_queries, run_stages, run_pipeline,
                       run_style_vote, run_seg3d)
from .ablation import VARIANTS, AblationRow, ablation_suite, variant_config, write_ablation

__all__ = ["ConfigError", "PipelineConfig", "load_config", "config_from_dict",
           "QueryMetrics", "SegMetrics", "metrics", "average", "summarize",
           "STAGES", "StageError", "StageCache", "Query", "parse_queries", "run_stages", "run_pipeline",
           "run_style_vote", "run_seg3d",
           "VARIANTS", "AblationRow", "ablation_suite", "variant_config", "write_ablation"]
