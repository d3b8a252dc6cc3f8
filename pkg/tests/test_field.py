"""
Multi-appearance language field: targets, loss, gradients and training.
"""

import numpy as np
import pytest

from langfield.autoencoder import init_params
from langfield.field import (FieldTargets, FieldTrainConfig, LanguageField, build_targets, field_loss,
                             train_field)
from langfield.optim import Adam
from langfield.uncertainty import APPEARANCE, TRANSIENT, UncertaintyMap
from splatting.raster.feature_map import FeatureMap
from splatting.raster.rasterizer import BlendWeights

from conftest import front_camera, random_scene


def _targets(cam, latents, u_a=None, u_t=None) -> FieldTargets:
    shape = cam.resolution
    u_a = UncertaintyMap.zeros(shape, APPEARANCE) if u_a is None else u_a
    u_t = UncertaintyMap.zeros(shape, TRANSIENT) if u_t is None else u_t
    return FieldTargets(cam, latents, u_a, u_t)


def _field(seed: int, num_slots: int = 2, dim: int = 2) -> LanguageField:
    return LanguageField(random_scene(seed, count=6, num_slots=num_slots, dim=dim))


class TestTargets:

    def test_build_targets_encodes_each_slot(self, camera, rng):
        params = init_params(8, 2, [4], seed=0)
        features = [FeatureMap(rng.standard_normal((16, 16, 8))) for _ in range(3)]
        t = build_targets(params, features, UncertaintyMap.zeros((16, 16), APPEARANCE),
                          UncertaintyMap.zeros((16, 16), TRANSIENT), camera)
        assert t.num_slots == 3 and t.latent_dim == 2
        assert np.array_equal(t.latents[0], t.latents[0].astype(np.float32).astype(np.float64))

    def test_channel_mismatch_raises(self, camera):
        params = init_params(8, 2, [4], seed=0)
        with pytest.raises(ValueError):
            build_targets(params, [np.zeros((16, 16, 7))], UncertaintyMap.zeros((16, 16), APPEARANCE),
                          UncertaintyMap.zeros((16, 16), TRANSIENT), camera)

    def test_resolution_mismatch_raises(self, camera):
        with pytest.raises(ValueError):
            _targets(camera, [np.zeros((8, 8, 2))])

    def test_unnormalized_uncertainty_raises(self, camera):
        with pytest.raises(ValueError):
            _targets(camera, [np.zeros((16, 16, 2))], u_t=UncertaintyMap(np.zeros((16, 16)), TRANSIENT))


class TestLoss:

    def test_perfect_targets_give_zero_loss(self, camera):
        field = _field(0)
        targets = _targets(camera, field.render(camera, dtype=np.float64))
        result = field_loss(field, camera, targets)
        assert result.loss == 0.0
        assert not any(g.values.any() for g in result.slots)

    def test_zero_weight_pixels_are_ignored(self, camera, rng):
        field = _field(1)
        latents = [rng.standard_normal((16, 16, 2)) for _ in range(2)]
        occluded = np.zeros((16, 16))
        occluded[4:9, 2:12] = 1.0
        u_t = UncertaintyMap(occluded, TRANSIENT, normalized=True)
        base = field_loss(field, camera, _targets(camera, latents, u_t=u_t)).loss

        changed = [h.copy() for h in latents]
        for h in changed:
            h[4:9, 2:12] += 100.0
        assert field_loss(field, camera, _targets(camera, changed, u_t=u_t)).loss == pytest.approx(base)

    def test_gradients_match_finite_differences(self, camera, rng):
        field = _field(2)
        targets = _targets(camera, [rng.standard_normal((16, 16, 2)) for _ in range(2)],
                           u_a=UncertaintyMap(rng.uniform(0, 1, (16, 16)), APPEARANCE, normalized=True))
        weights = BlendWeights(field.scene, camera)
        result = field_loss(field, camera, targets, weights)

        def loss_at(lang):
            moved = LanguageField(field.scene.with_lang_features(lang))
            return field_loss(moved, camera, targets, weights).loss

        eps = 1e-6
        lang = field.scene.lang_features
        for g, n, c in [(0, 0, 0), (1, 1, 1), (3, 0, 1), (5, 1, 0)]:
            step = np.zeros_like(lang)
            step[g, n, c] = eps
            numeric = (loss_at(lang + step) - loss_at(lang - step)) / (2 * eps)
            assert result.slots[n].values[g, c] == pytest.approx(numeric, rel=1e-4, abs=1e-6)

    def test_uncovered_pixels_render_zero(self):
        field = _field(7)
        cam = front_camera(size=32)
        uncovered = BlendWeights(field.scene, cam).alpha_accum == 0.0
        assert uncovered[0, 0]
        for rendered in field.render(cam, dtype=np.float64):
            assert not rendered[uncovered].any()

    def test_masked_pixels_contribute_no_gradient(self, camera, rng):
        field = _field(8)
        latents = [rng.standard_normal((16, 16, 2)) for _ in range(2)]
        masked = np.zeros((16, 16))
        masked[:, 5:11] = 1.0
        u_t = UncertaintyMap(masked, TRANSIENT, normalized=True)
        weights = BlendWeights(field.scene, camera)
        base = field_loss(field, camera, _targets(camera, latents, u_t=u_t), weights)

        moved = [h.copy() for h in latents]
        for h in moved:
            h[:, 5:11] = -h[:, 5:11] + 50.0
        again = field_loss(field, camera, _targets(camera, moved, u_t=u_t), weights)
        for a, b in zip(base.slots, again.slots):
            assert np.array_equal(a.values, b.values)

        everywhere = UncertaintyMap(np.ones((16, 16)), TRANSIENT, normalized=True)
        silent = field_loss(field, camera, _targets(camera, latents, u_t=everywhere), weights)
        assert silent.loss == 0.0
        assert not any(g.values.any() for g in silent.slots)

    def test_permuting_slots_permutes_gradients(self, camera, rng):
        field = _field(9, num_slots=3)
        latents = [rng.standard_normal((16, 16, 2)) for _ in range(3)]
        u_a = UncertaintyMap(rng.uniform(0, 1, (16, 16)), APPEARANCE, normalized=True)
        result = field_loss(field, camera, _targets(camera, latents, u_a=u_a))

        perm = [2, 0, 1]
        swapped = LanguageField(field.scene.with_lang_features(field.scene.lang_features[:, perm, :]))
        permuted = field_loss(swapped, camera, _targets(camera, [latents[p] for p in perm], u_a=u_a))
        assert permuted.loss == pytest.approx(result.loss, rel=1e-12)
        for k, p in enumerate(perm):
            np.testing.assert_allclose(permuted.slots[k].values, result.slots[p].values, rtol=1e-12, atol=1e-12)

    def test_slot_count_mismatch_raises(self, camera):
        field = _field(0, num_slots=2)
        with pytest.raises(ValueError):
            field_loss(field, camera, _targets(camera, [np.zeros((16, 16, 2))] * 3))


class TestTraining:

    def test_zero_learning_rate_keeps_initialization(self, camera, rng):
        scene = random_scene(4, count=6)
        targets = [_targets(camera, [rng.standard_normal((16, 16, 2)) for _ in range(2)])]
        field, losses = train_field(scene, targets, FieldTrainConfig(iterations=5, learning_rate=0.0))
        assert not field.scene.lang_features.any()
        assert field.scene.geometry_digest() == scene.geometry_digest()
        assert len(losses) == 5 and len(set(losses)) == 1

    def test_one_iteration_is_an_adam_step_on_the_loss(self, camera, rng):
        scene = random_scene(10, count=6)
        targets = [_targets(camera, [rng.standard_normal((16, 16, 2)) for _ in range(2)])]
        cfg = FieldTrainConfig(iterations=1, learning_rate=0.01)
        field, losses = train_field(scene, targets, cfg)

        start = LanguageField.empty(scene, 2, 2)
        grads = field_loss(start, camera, targets[0])
        expected = [np.zeros((len(scene), 2)) for _ in range(2)]
        for n, slot in enumerate(expected):
            Adam([slot], lr=cfg.learning_rate).step([grads.slots[n].values])
        assert losses == [grads.loss]
        np.testing.assert_allclose(field.scene.lang_features, np.stack(expected, axis=1), rtol=1e-6, atol=1e-7)

    def test_fits_a_rendered_field(self):
        cams = [front_camera(), front_camera(focal=12.0)]
        truth = _field(5)
        targets = [_targets(c, truth.render(c, dtype=np.float64)) for c in cams]
        field, losses = train_field(truth.scene, targets, FieldTrainConfig(iterations=400, learning_rate=0.05, seed=1))
        assert field.scene.lang_features.shape == truth.scene.lang_features.shape
        assert np.mean(losses[-10:]) < 0.2 * losses[0]

    def test_training_is_deterministic(self, camera, rng):
        scene = random_scene(6, count=5)
        targets = [_targets(camera, [rng.standard_normal((16, 16, 2))]) for _ in range(3)]
        cfg = FieldTrainConfig(iterations=10, learning_rate=0.01, seed=2)
        a, _ = train_field(scene, targets, cfg)
        b, _ = train_field(scene, targets, cfg)
        assert np.array_equal(a.scene.lang_features, b.scene.lang_features)

    def test_needs_targets(self, small_scene):
        with pytest.raises(ValueError):
            train_field(small_scene, [], FieldTrainConfig())


class TestPersistence:

    def test_save_and_load(self, tmp_path):
        field = _field(3)
        LanguageField(field.scene, level=1).save(str(tmp_path / "field"))
        loaded = LanguageField.load(str(tmp_path / "field"), field.scene.appearance_dim,
                                    field.scene.feature_dim_high, level=1)
        assert np.array_equal(loaded.scene.lang_features, field.scene.lang_features)
        assert loaded.level == 1

    def test_only_the_scene_is_written(self, tmp_path):
        _field(3).save(str(tmp_path / "field"))
        assert sorted(p.name for p in (tmp_path / "field").iterdir()) == ["field.mgs"]
