"""
ablation.py
-----------
Runs the pipeline once per named variant (and per seed) and tabulates the
mean metrics. Variants only override config fields, so they share every
stage whose inputs they leave untouched.
"""

import csv
import os
from dataclasses import dataclass

import numpy as np
from tqdm import tqdm

from .config import ConfigError, PipelineConfig
from .pipeline import log, run_pipeline

VARIANTS = {
    "full": {},
    "no-multi-appearance": {"N": 1},
    "no-post-ensemble": {"ensemble": {"type": "selfonly"}},
    "no-uncertainty-ae": {"ae_use_uncertainty": False},
    "tau-u-0.85": {"tau_u": 0.85},
    "tau-u-0.95": {"tau_u": 0.95},
    "no-tum": {"use_tum": False},
    "no-aum": {"use_aum": False},
    "no-tum-aum": {"use_tum": False, "use_aum": False},
    "no-bkg-filter": {"background_filter": False},
    "imglvlmax": {"ensemble": {"type": "imglvlmax"}},
    "pixmax": {"ensemble": {"type": "pixmax"}},
    "pixavg": {"ensemble": {"type": "pixavg"}},
    "pixweightedavg": {"ensemble": {"type": "pixweightedavg"}},
    "ae-all-appearances": {"ae_all_appearances": True},
}


@dataclass(frozen=True)
class AblationRow:
    """
    Metrics of one variant averaged over seeds.
    """
    variant: str
    miou: float
    mpa: float
    mp: float
    seeds: tuple


def variant_config(cfg: PipelineConfig, variant: str, seed: int = None) -> PipelineConfig:
    """
    Raises:
        ConfigError for an unknown variant
    """
    if variant not in VARIANTS:
        raise ConfigError(f"Unknown ablation variant '{variant}', expected one of {sorted(VARIANTS)}")
    overrides = dict(VARIANTS[variant])
    if seed is not None:
        overrides["seed"] = seed
    return cfg.with_overrides(**overrides)


def ablation_suite(cfg: PipelineConfig, variants: list = None, seeds: list = None,
                   verbose: bool = False) -> list:
    """
    Compare variants on the same scenes.

    Parameters:
        cfg (PipelineConfig): Base config
        variants (list[str]): Variant names, default every variant
        seeds (list[int]): Seeds to average over, default the config seed
        verbose (bool): Enable logging

    Returns:
        list[AblationRow]: In the requested variant order
    """
    variants = list(VARIANTS) if variants is None else list(variants)
    seeds = [cfg.seed] if not seeds else list(seeds)
    configs = {v: [variant_config(cfg, v, s) for s in seeds] for v in variants}

    rows = []
    for variant in tqdm(variants, desc="ablation", disable=not verbose, leave=False):
        results = [run_pipeline(c, verbose=verbose).metrics for c in configs[variant]]
        rows.append(AblationRow(variant,
                                float(np.mean([r.miou for r in results])),
                                float(np.mean([r.mpa for r in results])),
                                float(np.mean([r.mp for r in results])),
                                tuple(seeds)))
        log(f"[ablate] {variant}: mIoU {rows[-1].miou:.4f}", verbose)
    return rows


def write_ablation(path: str, rows: list):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["variant", "miou", "mpa", "mp", "seeds"])
        for r in rows:
            writer.writerow([r.variant, f"{r.miou:.6f}", f"{r.mpa:.6f}", f"{r.mp:.6f}",
                             " ".join(str(s) for s in r.seeds)])
