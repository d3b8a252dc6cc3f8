"""
Relevancy scores, ensembles, smoothing and the query operations built on them.
"""

import numpy as np
import pytest

from langfield.field import LanguageField
from scoremaps.base import BaseEnsemble, BoxSmoother
from scoremaps.catalog import Imglvlmax, Pixavg, Pixmax, Pixweightedavg, Selfonly, Weighted
from scoremaps.relevancy import CanonicalSet, QueryEmbedding, ScoreMap, background_score, relevancy_map, relevancy_scalar
from scoremaps.segment import (decode_slots, ensemble, gaussian_scores, hierarchical_query, hierarchical_segment3d,
                               make_ensemble, query_view, resolve_ensemble, segment2d, segment3d, select_level,
                               smooth, style_vote, style_votes)
from wildscene.generator import gen_scene
from wildscene.oracle import FeatureOracle
from wildscene.seeding import as_f32

from conftest import identity_params

ALL_ENSEMBLES = [Weighted, Imglvlmax, Pixmax, Pixavg, Pixweightedavg, Selfonly]


def _unit(*values) -> np.ndarray:
    v = np.array(values, dtype=np.float64)
    return v / np.linalg.norm(v)


def _maps(*arrays) -> list:
    return [ScoreMap(np.asarray(a, dtype=np.float64), "q", slot=n) for n, a in enumerate(arrays)]


class TestRelevancy:

    def test_spot_value(self):
        q = QueryEmbedding(_unit(1.0, 0.0), "q")
        canon = CanonicalSet((QueryEmbedding(_unit(0.0, 1.0)),))
        assert relevancy_scalar(_unit(1.0, 0.0), q, canon) == pytest.approx(0.73106, abs=1e-4)

    def test_minimum_over_canonicals(self):
        q = QueryEmbedding(_unit(1.0, 0.0), "q")
        canon = CanonicalSet((QueryEmbedding(_unit(0.0, 1.0)), QueryEmbedding(np.array([0.5, np.sqrt(0.75)]))))
        assert relevancy_scalar(_unit(1.0, 0.0), q, canon) == pytest.approx(0.62246, abs=1e-4)

    def test_strictly_increasing_in_query_dot(self):
        q = QueryEmbedding(_unit(1.0, 0.0), "q")
        canon = CanonicalSet((QueryEmbedding(_unit(0.0, 1.0)),))
        rising = relevancy_scalar(np.array([[a, 0.7] for a in np.linspace(-2.0, 2.0, 9)]), q, canon)
        assert np.all(np.diff(rising) > 0)

    def test_strictly_decreasing_in_canonical_dot(self):
        q = QueryEmbedding(_unit(1.0, 0.0), "q")
        canon = CanonicalSet((QueryEmbedding(_unit(0.0, 1.0)),))
        falling = relevancy_scalar(np.array([[0.4, b] for b in np.linspace(-2.0, 2.0, 9)]), q, canon)
        assert np.all(np.diff(falling) < 0)

    def test_map_shape_and_range(self, rng):
        q = QueryEmbedding(_unit(1.0, 0.0, 0.0), "q")
        canon = CanonicalSet((QueryEmbedding(_unit(0.0, 1.0, 0.0)),))
        m = relevancy_map(rng.standard_normal((4, 5, 3)), q, canon, slot=2)
        assert m.shape == (4, 5) and m.slot == 2 and m.label == "q"
        assert 0.0 <= m.values.min() and m.max() <= 1.0

    def test_width_mismatch_raises(self):
        q = QueryEmbedding(_unit(1.0, 0.0), "q")
        with pytest.raises(ValueError):
            relevancy_scalar(np.ones(3), q, CanonicalSet((q,)))
        with pytest.raises(ValueError):
            CanonicalSet(())

    def test_background_score_suppresses_background_pixels(self):
        q = QueryEmbedding(_unit(1.0, 0.0, 0.0), "arch")
        sky = QueryEmbedding(_unit(0.0, 1.0, 0.0), "sky")
        features = np.array([[_unit(0.0, 1.0, 0.0), _unit(1.0, 0.0, 0.0)]])
        bg = background_score(features, q, [sky])
        assert bg.values[0, 0] == pytest.approx(1.0 - 0.73106, abs=1e-4)
        assert bg.values[0, 1] == pytest.approx(1.0 - 1.0 / (1.0 + np.e), abs=1e-4)

    def test_score_map_range_is_checked(self):
        with pytest.raises(ValueError):
            ScoreMap(np.array([[1.2]]))
        with pytest.raises(ValueError):
            ScoreMap(np.zeros(3))


class TestEnsembles:

    def test_max_proportional_weights(self):
        stack = np.stack([np.array([[0.6, 0.0]]), np.array([[0.2, 0.1]])])
        assert np.allclose(Weighted().weights(stack), [0.75, 0.25])
        fused = Weighted().fuse(_maps(*stack))
        assert np.allclose(fused.values, [[0.75 * 0.6 + 0.25 * 0.2, 0.025]])

    @pytest.mark.parametrize("c", [0.25, 3.0])
    def test_weights_ignore_a_common_scale(self, rng, c):
        stack = rng.uniform(0.0, 1.0, (4, 3, 5))
        assert np.allclose(Weighted().weights(c * stack), Weighted().weights(stack), rtol=1e-12)

    def test_all_zero_maps_get_uniform_weights(self):
        assert np.allclose(Weighted().weights(np.zeros((4, 2, 2))), 0.25)

    @pytest.mark.parametrize("cls", ALL_ENSEMBLES)
    def test_output_stays_in_pointwise_envelope(self, cls):
        rng = np.random.default_rng(11)
        for _ in range(100):
            stack = rng.uniform(0.0, 1.0, (int(rng.integers(1, 6)), 4, 5))
            fused = cls().fuse(_maps(*stack)).values
            assert np.all(fused >= stack.min(axis=0) - 1e-12)
            assert np.all(fused <= stack.max(axis=0) + 1e-12)

    def test_weights_sum_to_one(self):
        rng = np.random.default_rng(12)
        for _ in range(100):
            stack = rng.uniform(0.0, 1.0, (int(rng.integers(1, 6)), 3, 3))
            assert Weighted().weights(stack).sum() == pytest.approx(1.0, abs=1e-9)

    def test_pixavg_of_identical_maps_is_filtered_map(self, rng):
        m = rng.uniform(0.0, 1.0, (3, 3))
        bg = ScoreMap(rng.uniform(0.0, 1.0, (3, 3)))
        fused = Pixavg().fuse(_maps(m, m, m), bg)
        assert np.allclose(fused.values, m * bg.values)
        assert np.allclose(Weighted().fuse(_maps(m, m), bg).values, m * bg.values)

    def test_alternatives(self):
        a = np.array([[0.2, 0.9]])
        b = np.array([[0.8, 0.1]])
        assert np.allclose(Pixmax().fuse(_maps(a, b)).values, [[0.8, 0.9]])
        assert np.allclose(Imglvlmax().fuse(_maps(a, b)).values, a)
        assert np.allclose(Selfonly().fuse(_maps(a, b)).values, b)
        assert np.allclose(Pixweightedavg().fuse(_maps(a, b)).values, [[0.68, 0.82]])
        assert np.allclose(Pixweightedavg().fuse(_maps(np.zeros((1, 2)))).values, 0.0)

    def test_fused_map_is_tagged(self):
        fused = Pixavg().fuse(_maps(np.zeros((2, 2)), np.ones((2, 2))))
        assert fused.slot == "fused" and fused.label == "q"

    def test_bad_inputs_raise(self):
        with pytest.raises(ValueError):
            Pixavg().fuse([])
        with pytest.raises(ValueError):
            Pixavg().fuse(_maps(np.zeros((2, 2)), np.zeros((3, 3))))
        with pytest.raises(ValueError):
            Pixavg().fuse(_maps(np.zeros((2, 2))), ScoreMap(np.zeros((3, 3))))

    def test_resolve_by_name(self):
        assert resolve_ensemble("pixweightedavg") is Pixweightedavg
        assert isinstance(make_ensemble({"type": "imglvlmax"}), Imglvlmax)
        assert isinstance(make_ensemble("selfonly"), Selfonly)
        instance = Pixmax()
        assert make_ensemble(instance) is instance
        assert isinstance(make_ensemble("weighted"), BaseEnsemble)

    def test_resolve_errors(self):
        with pytest.raises(ImportError):
            resolve_ensemble("median")
        with pytest.raises(ValueError):
            make_ensemble({"type": "weighted", "temperature": 2.0})
        with pytest.raises(ValueError):
            make_ensemble({"name": "weighted"})

    def test_ensemble_function_defaults_to_weighted(self):
        maps = _maps(np.array([[0.6, 0.0]]), np.array([[0.2, 0.1]]))
        assert np.allclose(ensemble(maps).values, Weighted().fuse(maps).values)


class TestSmoothing:

    def test_delta_spreads_over_kernel(self):
        values = np.zeros((40, 40))
        values[20, 20] = 1.0
        out = BoxSmoother(20).apply(values)
        assert out.shape == (40, 40)
        assert out.max() == pytest.approx(1.0 / 400.0)
        assert out.sum() == pytest.approx(1.0)
        # window around p spans [p - 10, p + 9]
        assert out[11, 11] == pytest.approx(1.0 / 400.0)
        assert out[10, 20] == 0.0 and out[30, 20] == pytest.approx(1.0 / 400.0)

    def test_constant_map_is_unchanged(self):
        assert np.allclose(BoxSmoother(5).apply(np.full((8, 8), 0.3)), 0.3)

    def test_kernel_one_is_identity(self, rng):
        values = rng.uniform(0, 1, (4, 4))
        assert np.array_equal(BoxSmoother(1).apply(values), values)

    def test_invalid_kernels_raise(self):
        with pytest.raises(ValueError):
            BoxSmoother(0)
        with pytest.raises(ValueError):
            BoxSmoother(9).apply(np.zeros((8, 8)))

    def test_smooth_keeps_tags(self):
        m = ScoreMap(np.ones((4, 4)), "arch", slot="fused", level=1)
        out = smooth(m, 3)
        assert out.label == "arch" and out.level == 1


class TestSegmentation:

    def test_threshold_is_strict(self):
        m = ScoreMap(np.array([[0.4, 0.41, 0.1]]))
        assert segment2d(m).tolist() == [[False, True, False]]
        with pytest.raises(ValueError):
            segment2d(m, tau=1.0)

    def test_hierarchical_picks_largest_maximum(self):
        levels = [ScoreMap(np.array([[0.3, 0.5]]), level=0), ScoreMap(np.array([[0.7, 0.1]]), level=1),
                  ScoreMap(np.array([[0.7, 0.0]]), level=2)]
        assert select_level(levels) == 1
        assert hierarchical_query(levels).level == 1
        with pytest.raises(ValueError):
            select_level([])

    def test_style_vote_majority(self):
        maps = {"gothic": [ScoreMap(np.array([[0.9]])), ScoreMap(np.array([[0.2]])), ScoreMap(np.array([[0.8]]))],
                "modern": [ScoreMap(np.array([[0.5]])), ScoreMap(np.array([[0.6]])), ScoreMap(np.array([[0.1]]))]}
        assert style_votes(maps) == ["gothic", "modern", "gothic"]
        assert style_vote(maps) == "gothic"

    @pytest.mark.parametrize("transform", [np.sqrt, lambda v: v ** 3, lambda v: 0.5 * v + 0.1])
    def test_style_vote_ignores_monotone_rescaling(self, rng, transform):
        maps = {s: [ScoreMap(rng.uniform(0.0, 0.9, (3, 3))) for _ in range(5)] for s in ("gothic", "modern", "rococo")}
        moved = {s: [ScoreMap(transform(m.values)) for m in ms] for s, ms in maps.items()}
        assert style_votes(moved) == style_votes(maps)
        assert style_vote(moved) == style_vote(maps)

    def test_style_vote_ties_go_to_first_label(self):
        maps = {"modern": [ScoreMap(np.array([[0.9]])), ScoreMap(np.array([[0.1]]))],
                "baroque": [ScoreMap(np.array([[0.1]])), ScoreMap(np.array([[0.9]]))]}
        assert style_vote(maps) == "baroque"
        equal = {"b": [ScoreMap(np.array([[0.5]]))], "a": [ScoreMap(np.array([[0.5]]))]}
        assert style_votes(equal) == ["a"]

    def test_style_vote_needs_aligned_images(self):
        with pytest.raises(ValueError):
            style_votes({"a": [ScoreMap(np.zeros((1, 1)))], "b": []})
        with pytest.raises(ValueError):
            style_votes({})


class TestFieldQueries:
    """
    Fields whose latents are the oracle's own embeddings, decoded by an
    identity autoencoder, so no training is involved.
    """

    def _setup(self, tiny_spec):
        scene, views = gen_scene(tiny_spec)
        oracle = FeatureOracle.create(tiny_spec.class_names, 2, 12, 0.0, seed=0)
        table = np.array([oracle.class_embeddings[k] for k in range(tiny_spec.num_classes)])
        lang = np.repeat(table[scene.class_ids][:, np.newaxis, :], 2, axis=1)
        field = LanguageField(scene.with_lang_features(as_f32(lang)))
        return field, views, oracle, identity_params(12)

    def test_segment3d_selects_the_queried_class(self, tiny_spec):
        field, _, oracle, params = self._setup(tiny_spec)
        canon = CanonicalSet.from_oracle(oracle)
        mask = segment3d(field.scene, params, oracle.query("arch"), canon)
        assert np.array_equal(mask, field.scene.class_ids == 0)
        with pytest.raises(ValueError):
            segment3d(field.scene, params, oracle.query("arch"), canon, tau=0.0)

    def test_segment3d_uses_the_highest_scoring_level(self, tiny_spec):
        field, _, oracle, params = self._setup(tiny_spec)
        canon = CanonicalSet.from_oracle(oracle)
        blank = field.scene.with_lang_features(np.zeros_like(field.scene.lang_features))
        q = oracle.query("arch")
        level, mask = hierarchical_segment3d([blank, field.scene], params, q, canon)
        assert level == 1
        assert np.array_equal(mask, segment3d(field.scene, params, q, canon))
        assert gaussian_scores(blank, params, q, canon).max() < gaussian_scores(field.scene, params, q, canon).max()

    def test_level_ties_go_to_the_lowest(self, tiny_spec):
        field, _, oracle, params = self._setup(tiny_spec)
        canon = CanonicalSet.from_oracle(oracle)
        level, _ = hierarchical_segment3d([field.scene, field.scene], params, oracle.query("column"), canon)
        assert level == 0
        with pytest.raises(ValueError):
            hierarchical_segment3d([], params, oracle.query("column"), canon)

    def test_query_view_scores_the_object_higher(self, tiny_spec):
        field, views, oracle, params = self._setup(tiny_spec)
        canon = CanonicalSet.from_oracle(oracle)
        v = views[0]
        decoded = decode_slots(field, params, v.camera)
        assert len(decoded) == 2 and decoded[0].shape == (32, 32, 12)
        for name, k in (("arch", 0), ("column", 1)):
            fused = query_view(decoded, oracle.query(name), canon, oracle.background_queries(), kernel=3)
            inside = v.label_map == k
            if inside.any():
                assert fused.values[inside].mean() > fused.values[~inside].mean()
