"""
End-to-end pipeline runs on the smoke config: caching, determinism, the
extra commands and the ablation suite.
"""

import csv
import os
from pathlib import Path

import numpy as np
import pytest

from splatting.raster.tensor_io import load_tensor
from wild_ovs.ablation import VARIANTS, ablation_suite, variant_config, write_ablation
from wild_ovs.config import ConfigError, config_from_dict, load_config
from wild_ovs.pipeline import (DONE, STAGES, StageError, config_hash, load_world, run_pipeline, run_seg3d,
                               run_stages, run_style_vote)

from conftest import SMOKE

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _smoke(out, **overrides):
    return config_from_dict({**SMOKE, "out": str(out), **overrides})


def _cached_stages(out) -> list:
    root = Path(out) / "cache"
    return sorted(p.name for p in root.iterdir() if (p / DONE).exists())


class TestStageCache:

    def test_hash_is_order_independent(self):
        assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
        assert len(config_hash({})) == 16

    def test_every_stage_leaves_a_done_directory(self, tmp_path):
        result = run_pipeline(_smoke(tmp_path / "out"))
        assert set(result.dirs) == set(STAGES)
        for stage, directory in result.dirs.items():
            assert os.path.basename(directory).startswith(f"{stage}-")
            assert os.path.exists(os.path.join(directory, DONE))

    def test_rerun_reuses_every_stage(self, tmp_path):
        cfg = _smoke(tmp_path / "out")
        first = run_pipeline(cfg)
        before = _cached_stages(cfg.out)
        stamps = {s: os.path.getmtime(os.path.join(d, DONE)) for s, d in first.dirs.items()}

        second = run_pipeline(cfg)
        assert second.dirs == first.dirs
        assert _cached_stages(cfg.out) == before
        assert {s: os.path.getmtime(os.path.join(d, DONE)) for s, d in second.dirs.items()} == stamps

    def test_threshold_change_only_reruns_downstream(self, tmp_path):
        a = run_pipeline(_smoke(tmp_path / "out"))
        b = run_pipeline(_smoke(tmp_path / "out", tau=0.5))
        for stage in ("gen", "features", "uncertainty", "train-ae", "targets", "train-field"):
            assert a.dirs[stage] == b.dirs[stage]
        assert a.dirs["query"] != b.dirs["query"]

    def test_incomplete_directory_is_rebuilt(self, tmp_path):
        cfg = _smoke(tmp_path / "out")
        state = run_stages(cfg, "gen")
        os.remove(os.path.join(state.dirs["gen"], DONE))
        again = run_stages(cfg, "gen")
        assert again.dirs["gen"] == state.dirs["gen"]
        assert os.path.exists(os.path.join(again.dirs["gen"], DONE))


class TestPipeline:

    def test_report_layout(self, tmp_path):
        result = run_pipeline(_smoke(tmp_path / "out"))
        with open(result.report, newline="", encoding="utf-8") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["query", "iou", "pa", "p"]
        assert [r[0] for r in rows[1:]] == ["arch", "column", "mean"]
        assert 0.0 <= result.metrics.miou <= 1.0
        assert result.metrics.miou == pytest.approx(np.mean([m.iou for m in result.metrics.per_query.values()]),
                                                    abs=1e-6)

    def test_runs_are_byte_identical(self, tmp_path):
        a = run_pipeline(_smoke(tmp_path / "a"))
        b = run_pipeline(_smoke(tmp_path / "b"))
        assert Path(a.report).read_bytes() == Path(b.report).read_bytes()
        assert Path(a.dirs["train-ae"], "params.mae").read_bytes() == Path(b.dirs["train-ae"], "params.mae").read_bytes()

    def test_cached_and_fresh_runs_agree(self, tmp_path):
        cfg = _smoke(tmp_path / "out")
        fresh = Path(run_pipeline(cfg).report).read_bytes()
        assert Path(run_pipeline(cfg).report).read_bytes() == fresh

    def test_partial_run_has_no_report(self, tmp_path):
        result = run_pipeline(_smoke(tmp_path / "out"), until="uncertainty")
        assert list(result.dirs) == ["gen", "features", "uncertainty"]
        assert result.report is None and result.metrics is None
        assert not (tmp_path / "out" / "report.csv").exists()

    def test_generated_world_is_persisted(self, tmp_path):
        state = run_stages(_smoke(tmp_path / "out"), "gen")
        scene, views = load_world(state.dirs["gen"])
        assert len(scene) == SMOKE["num_gaussians"] and len(views) == SMOKE["views"]
        assert views[0].label_map.shape == (SMOKE["height"], SMOKE["width"])
        assert scene.appearance_dim == 8 and scene.feature_dim_high == SMOKE["D"]

    def test_unknown_stage_raises(self, tmp_path):
        with pytest.raises(ConfigError):
            run_pipeline(_smoke(tmp_path / "out"), until="render")

    def test_too_many_appearances_fail_in_features(self, tmp_path):
        with pytest.raises(StageError) as info:
            run_pipeline(_smoke(tmp_path / "out", N=5))
        assert info.value.stage == "features"
        assert "qualified" in str(info.value)

    def test_no_class_queries_fail_in_query(self, tmp_path):
        cfg = _smoke(tmp_path / "out", queries=[["old", "style"]])
        with pytest.raises(StageError) as info:
            run_pipeline(cfg)
        assert info.value.stage == "query"


class TestExtraCommands:

    def test_style_vote_writes_votes(self, tmp_path):
        cfg = _smoke(tmp_path / "out", styles=["gothic", "modern"], true_style="gothic")
        winner = run_style_vote(cfg)
        assert winner in ("gothic", "modern")
        with open(tmp_path / "out" / "style_vote.csv", newline="", encoding="utf-8") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["view", "vote"]
        assert len(rows) == 1 + SMOKE["views"] + 1
        assert rows[-1] == ["winner", winner]

    def test_style_vote_needs_styles(self, tmp_path):
        with pytest.raises(ConfigError):
            run_style_vote(_smoke(tmp_path / "out"))

    def test_seg3d_writes_masks(self, tmp_path):
        masks = run_seg3d(_smoke(tmp_path / "out"))
        assert list(masks) == ["arch", "column"]
        assert all(m.shape == (SMOKE["num_gaussians"],) and m.dtype == bool for m in masks.values())
        directory = tmp_path / "out" / "seg3d"
        stored = load_tensor(str(directory / "mask_0.mft"), squeeze=True) > 0.5
        assert np.array_equal(stored, masks["arch"])
        with open(directory / "seg3d.csv", newline="", encoding="utf-8") as f:
            header = next(csv.reader(f))
        assert header == ["query", "level", "selected", "class_gaussians", "precision", "recall"]


class TestAblation:

    def test_variants_only_override_fields(self, tmp_path):
        cfg = _smoke(tmp_path / "out")
        assert variant_config(cfg, "no-multi-appearance").N == 1
        assert variant_config(cfg, "no-post-ensemble").ensemble == {"type": "selfonly"}
        assert variant_config(cfg, "full", seed=9).seed == 9
        with pytest.raises(ConfigError):
            variant_config(cfg, "no-gaussians")

    def test_every_variant_config_is_valid(self, tmp_path):
        cfg = _smoke(tmp_path / "out")
        for name in VARIANTS:
            variant_config(cfg, name).validate()

    def test_full_variant_matches_the_pipeline(self, tmp_path):
        cfg = _smoke(tmp_path / "out")
        rows = ablation_suite(cfg, ["full", "no-tum"])
        assert [r.variant for r in rows] == ["full", "no-tum"]
        assert rows[0].miou == pytest.approx(run_pipeline(cfg).metrics.miou)
        assert rows[0].seeds == (SMOKE["seed"],)

        path = tmp_path / "out" / "ablation.csv"
        write_ablation(str(path), rows)
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "variant,miou,mpa,mp,seeds" and lines[1].startswith("full,")

    def test_seeds_are_averaged(self, tmp_path):
        cfg = _smoke(tmp_path / "out")
        rows = ablation_suite(cfg, ["full"], seeds=[3, 4])
        single = [run_pipeline(cfg.with_overrides(seed=s)).metrics.miou for s in (3, 4)]
        assert rows[0].miou == pytest.approx(np.mean(single))
        assert rows[0].seeds == (3, 4)


@pytest.mark.slow
class TestBenchmarks:
    """
    Full-size runs of the shipped configs.
    """

    def test_clean_scene_is_segmented(self, tmp_path):
        cfg = load_config(str(CONFIGS / "clean.json"), out=str(tmp_path / "clean"))
        assert run_pipeline(cfg).metrics.miou >= 0.95

    def test_noisy_scene_ablation(self, tmp_path):
        cfg = load_config(str(CONFIGS / "noisy.json"), out=str(tmp_path / "noisy"))
        rows = {r.variant: r for r in ablation_suite(cfg, ["full", "no-multi-appearance", "no-tum"],
                                                     seeds=[0, 1, 2, 3, 4])}
        assert rows["full"].miou >= rows["no-multi-appearance"].miou + 0.03
        assert rows["full"].miou >= rows["no-tum"].miou + 0.01
