import numpy as np
import pytest

import cdgzsl.gan as gan_mod
from cdgzsl.gan import (
    ConditionalGAN,
    interpolate_features,
    synthesize_unseen,
    train_final_classifier,
    train_gan,
)
from cdgzsl.nets import FeedForwardNet, Layer


def make_gan(rng, d_psi=4, d_cond=3, d_noise=3):
    gen = FeedForwardNet.create([d_cond + d_noise, 6, d_psi], ["relu", "identity"], rng)
    critic = FeedForwardNet.create([d_psi + d_cond, 6, 1], ["tanh", "identity"], rng)
    return ConditionalGAN(gen, critic, d_cond, d_noise, d_psi, True)


class TestTraining:
    def test_short_run_trace_finite(self, fast_config, rng):
        psi = rng.standard_normal((60, 4)).astype(np.float32)
        class_ids = rng.integers(3, size=60)
        sems = rng.standard_normal((3, 5)).astype(np.float32)
        gan, trace = train_gan(psi, class_ids, sems, fast_config, rng)
        assert len(trace["wasserstein"]) == fast_config.gan_steps * fast_config.n_critic
        assert np.isfinite(trace["wasserstein"]).all()
        assert np.isfinite(trace["generator"]).all()
        assert gan.generator.n_out == 4
        assert gan.critic.n_in == 4 + 5

    def test_beta_zero_skips_penalty(self, fast_config, rng, monkeypatch):
        def boom(*args, **kwargs):
            raise AssertionError("penalty branch entered with gp_weight == 0")

        monkeypatch.setattr(gan_mod, "grad_norm_penalty", boom)
        psi = rng.standard_normal((40, 4)).astype(np.float32)
        cfg = fast_config.replace(gp_weight=0.0, gan_steps=3)
        _, trace = train_gan(psi, rng.integers(2, size=40),
                             rng.standard_normal((2, 3)).astype(np.float32), cfg, rng)
        assert all(p == 0.0 for p in trace["penalty"])

    def test_penalty_branch_used_otherwise(self, fast_config, rng, monkeypatch):
        calls = []
        real_penalty = gan_mod.grad_norm_penalty

        def spy(*args, **kwargs):
            calls.append(1)
            return real_penalty(*args, **kwargs)

        monkeypatch.setattr(gan_mod, "grad_norm_penalty", spy)
        psi = rng.standard_normal((40, 4)).astype(np.float32)
        cfg = fast_config.replace(gan_steps=2)
        train_gan(psi, rng.integers(2, size=40),
                  rng.standard_normal((2, 3)).astype(np.float32), cfg, rng)
        assert len(calls) == cfg.gan_steps * cfg.n_critic

    def test_unconditional_critic_flag(self, fast_config, rng):
        psi = rng.standard_normal((40, 4)).astype(np.float32)
        cfg = fast_config.replace(unconditional_critic=True, gan_steps=3)
        gan, _ = train_gan(psi, rng.integers(2, size=40),
                           rng.standard_normal((2, 3)).astype(np.float32), cfg, rng)
        assert not gan.conditional
        assert gan.critic.n_in == 4


class TestInterpolation:
    def test_points_lie_on_segments(self, rng):
        real = rng.standard_normal((50, 6)).astype(np.float32)
        fake = rng.standard_normal((50, 6)).astype(np.float32)
        mixed = interpolate_features(real, fake, rng)
        lo = np.minimum(real, fake)
        hi = np.maximum(real, fake)
        assert (mixed >= lo - 1e-6).all() and (mixed <= hi + 1e-6).all()


class TestSynthesis:
    def test_row_counts(self, rng):
        gan = make_gan(rng)
        sems = rng.standard_normal((13, 3)).astype(np.float32)
        out = synthesize_unseen(gan, sems, np.arange(100, 113), 100, rng)
        assert out.fake_features.shape == (1300, 4)
        assert out.fake_class_ids.shape == (1300,)
        counts = {c: int((out.fake_class_ids == c).sum()) for c in range(100, 113)}
        assert all(v == 100 for v in counts.values())
        # rows grouped by class, in the order given
        assert (np.diff(out.fake_class_ids) >= 0).all()

    def test_same_seed_bit_identical(self, rng):
        gan = make_gan(rng)
        sems = rng.standard_normal((3, 3)).astype(np.float32)
        a = synthesize_unseen(gan, sems, np.arange(3), 7, np.random.default_rng(9))
        b = synthesize_unseen(gan, sems, np.arange(3), 7, np.random.default_rng(9))
        assert a.fake_features.tobytes() == b.fake_features.tobytes()

    def test_zero_weight_generator_emits_bias(self, rng):
        bias = np.array([1.0, -2.0, 0.5], dtype=np.float32)
        gen = FeedForwardNet([Layer(np.zeros((5, 3)), bias, "identity")])
        gan = ConditionalGAN(gen, None, 2, 3, 3, True)
        out = synthesize_unseen(gan, rng.standard_normal((2, 2)).astype(np.float32),
                                np.arange(2), 4, rng)
        assert np.allclose(out.fake_features, bias)

    def test_per_class_count_validated(self, rng):
        gan = make_gan(rng)
        with pytest.raises(ValueError, match="per_class_count"):
            synthesize_unseen(gan, np.ones((1, 3), dtype=np.float32), np.array([0]), 0, rng)


class TestFinalClassifier:
    def test_separable_toy_reaches_high_accuracy(self, fast_config, rng):
        # four well-separated clusters, two "real" and two "fake"
        centers = np.array([[4, 0], [-4, 0], [0, 4], [0, -4]], dtype=np.float32)
        real = np.concatenate([centers[c] + 0.05 * rng.standard_normal((30, 2)) for c in (0, 1)])
        fake = np.concatenate([centers[c] + 0.05 * rng.standard_normal((30, 2)) for c in (2, 3)])
        real_ids = np.repeat([0, 1], 30)
        fake_ids = np.repeat([2, 3], 30)
        cfg = fast_config.replace(classifier_steps=2000, learning_rate=2e-3)
        clf = train_final_classifier(real, real_ids, fake, fake_ids, [0, 1, 2, 3], cfg, rng)
        logits, _ = clf.net.forward(np.concatenate([real, fake]).astype(np.float32))
        preds = clf.class_ids[logits.argmax(axis=1)]
        truth = np.concatenate([real_ids, fake_ids])
        assert (preds == truth).mean() >= 0.99

    def test_empty_fake_pool_rejected(self, fast_config, rng):
        real = rng.standard_normal((10, 3)).astype(np.float32)
        with pytest.raises(ValueError, match="unseen classes unrepresented"):
            train_final_classifier(real, np.zeros(10, dtype=int),
                                   np.zeros((0, 3), dtype=np.float32), np.zeros(0, dtype=int),
                                   [0, 1], fast_config, rng)

    def test_output_dimension_is_full_class_set(self, fast_config, rng):
        real = rng.standard_normal((20, 3)).astype(np.float32)
        real_ids = rng.integers(2, size=20)
        fake = rng.standard_normal((10, 3)).astype(np.float32)
        fake_ids = np.repeat([5, 7], 5)
        clf = train_final_classifier(real, real_ids, fake, fake_ids, [0, 1, 5, 7],
                                     fast_config, rng)
        assert clf.net.n_out == 4
        assert clf.class_ids.tolist() == [0, 1, 5, 7]
