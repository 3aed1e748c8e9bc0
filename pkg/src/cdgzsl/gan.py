"""Conditional feature generation with a gradient-penalty Wasserstein critic.

The generator maps [refined class semantics ‖ Gaussian noise] to a feature
vector in the common space; the critic scores [feature ‖ semantics] (or the
feature alone in unconditional mode). The critic uses tanh hidden units so
the penalty's gradient-of-gradient is smooth, and interpolation for the
penalty mixes the feature part only, within matched-class batches. Fake
unseen-class features plus real seen-class features then train the final
softmax classifier over the full class set.
"""

from dataclasses import dataclass

import numpy as np

from .nets import (
    FeedForwardNet,
    adam_init,
    adam_step,
    grad_norm_penalty,
    softmax_cross_entropy,
)


@dataclass
class ConditionalGAN:
    generator: FeedForwardNet  # [d_cond + d_noise] -> d_psi
    critic: FeedForwardNet     # [d_psi (+ d_cond)] -> 1, tanh hidden
    d_cond: int
    d_noise: int
    d_psi: int
    conditional: bool


@dataclass
class SynthesisResult:
    fake_features: np.ndarray
    fake_class_ids: np.ndarray  # original class ids, rows grouped by class
    per_class_count: int


@dataclass
class FinalClassifier:
    net: FeedForwardNet
    class_ids: np.ndarray  # logit index -> original class id (sorted ascending)


def _critic_input(gan, features, conditions):
    if gan.conditional:
        return np.concatenate([features, conditions], axis=1)
    return features


def interpolate_features(real, fake, rng):
    """Per-sample convex mixes of real and fake feature rows."""
    u = rng.uniform(size=(real.shape[0], 1)).astype(real.dtype)
    return u * real + (1.0 - u) * fake


def train_gan(psi_features, class_ids, semantics_by_class, cfg, rng):
    """Adversarial training on encoded seen-class features.

    semantics_by_class is indexed by original class id to fetch each
    sample's conditioning vector. Returns (gan, trace) where trace holds
    per-critic-step Wasserstein estimates and penalty values plus
    per-generator-step losses.
    """
    psi = np.asarray(psi_features, dtype=np.float32)
    class_ids = np.asarray(class_ids)
    cond = np.asarray(semantics_by_class, dtype=np.float32)
    d_psi = psi.shape[1]
    d_cond = cond.shape[1]
    d_noise = cfg.noise_dim()

    generator = FeedForwardNet.create(
        [d_cond + d_noise, cfg.gan_hidden, d_psi], ["relu", "identity"], rng
    )
    critic_in = d_psi + (d_cond if not cfg.unconditional_critic else 0)
    critic = FeedForwardNet.create([critic_in, cfg.gan_hidden, 1], ["tanh", "identity"], rng)
    gan = ConditionalGAN(
        generator=generator,
        critic=critic,
        d_cond=d_cond,
        d_noise=d_noise,
        d_psi=d_psi,
        conditional=not cfg.unconditional_critic,
    )
    opt_g = adam_init(generator.parameters(), cfg.learning_rate * cfg.gan_lr_scale)
    opt_d = adam_init(critic.parameters(), cfg.learning_rate * cfg.gan_lr_scale)

    n = psi.shape[0]
    batch = min(cfg.gan_batch, n)
    trace = {"wasserstein": [], "penalty": [], "generator": []}

    for _ in range(cfg.gan_steps):
        for _ in range(cfg.n_critic):
            picks = rng.integers(n, size=batch)
            real = psi[picks]
            a = cond[class_ids[picks]]
            eps = rng.standard_normal((batch, d_noise)).astype(np.float32)
            fake, _ = generator.forward(np.concatenate([a, eps], axis=1))

            real_scores, cache_r = critic.forward(_critic_input(gan, real, a))
            fake_scores, cache_f = critic.forward(_critic_input(gan, fake, a))
            wasserstein = float(real_scores.mean() - fake_scores.mean())
            if not np.isfinite(wasserstein):
                raise RuntimeError(f"critic diverged: Wasserstein estimate {wasserstein}")

            # critic minimizes -(E[D(real)] - E[D(fake)]) + beta * penalty
            ones = np.full((batch, 1), 1.0 / batch, dtype=np.float32)
            g_real, _ = critic.backward(cache_r, -ones)
            g_fake, _ = critic.backward(cache_f, ones)
            grads = [gr + gf for gr, gf in zip(g_real, g_fake)]
            penalty = 0.0
            if cfg.gp_weight != 0.0:
                mixed = interpolate_features(real, fake, rng)
                penalty, g_pen = grad_norm_penalty(
                    critic, _critic_input(gan, mixed, a), norm_cols=d_psi
                )
                grads = [g + cfg.gp_weight * gp for g, gp in zip(grads, g_pen)]
            adam_step(critic.parameters(), grads, opt_d)
            trace["wasserstein"].append(wasserstein)
            trace["penalty"].append(penalty)

        # generator minimizes -E[D(fake)]
        picks = rng.integers(n, size=batch)
        a = cond[class_ids[picks]]
        eps = rng.standard_normal((batch, d_noise)).astype(np.float32)
        fake, cache_g = generator.forward(np.concatenate([a, eps], axis=1))
        scores, cache_f = critic.forward(_critic_input(gan, fake, a))
        loss_g = float(-scores.mean())
        if not np.isfinite(loss_g):
            raise RuntimeError(f"generator diverged: loss {loss_g}")
        _, g_input = critic.backward(cache_f, np.full((batch, 1), -1.0 / batch, dtype=np.float32))
        g_gen, _ = generator.backward(cache_g, g_input[:, :d_psi])
        adam_step(generator.parameters(), g_gen, opt_g)
        trace["generator"].append(loss_g)

    return gan, trace


def synthesize_unseen(gan, unseen_semantics, unseen_class_ids, per_class_count, rng):
    """Generate per_class_count fake features per unseen class, grouped by class."""
    if per_class_count < 1:
        raise ValueError("per_class_count must be >= 1")
    unseen_semantics = np.asarray(unseen_semantics, dtype=np.float32)
    unseen_class_ids = np.asarray(unseen_class_ids)
    if unseen_semantics.shape[0] != unseen_class_ids.size:
        raise ValueError("one semantic row per unseen class required")
    blocks = []
    ids = []
    for row, class_id in zip(unseen_semantics, unseen_class_ids):
        eps = rng.standard_normal((per_class_count, gan.d_noise)).astype(np.float32)
        a = np.repeat(row[None, :], per_class_count, axis=0)
        fake, _ = gan.generator.forward(np.concatenate([a, eps], axis=1))
        blocks.append(fake)
        ids.append(np.full(per_class_count, class_id, dtype=np.int64))
    return SynthesisResult(
        fake_features=np.concatenate(blocks, axis=0),
        fake_class_ids=np.concatenate(ids),
        per_class_count=per_class_count,
    )


def train_final_classifier(real_features, real_class_ids, fake_features, fake_class_ids,
                           class_order, cfg, rng):
    """Softmax classifier over the full class set, trained on real + fake pools.

    class_order lists the class ids the classifier covers (ascending); every
    listed class must be represented in the union training pool. Batches are
    class-balanced: classes are drawn uniformly, then a sample within the
    class's pool.
    """
    class_order = np.asarray(sorted(class_order))
    features = np.concatenate(
        [np.asarray(real_features, dtype=np.float32), np.asarray(fake_features, dtype=np.float32)],
        axis=0,
    )
    labels = np.concatenate([np.asarray(real_class_ids), np.asarray(fake_class_ids)])
    pools = []
    for class_id in class_order:
        pool = np.flatnonzero(labels == class_id)
        if pool.size == 0:
            raise ValueError(
                f"unseen classes unrepresented: class id {int(class_id)} has no training rows"
            )
        pools.append(pool)

    net = FeedForwardNet.create([features.shape[1], class_order.size], ["identity"], rng)
    opt = adam_init(net.parameters(), cfg.learning_rate)
    label_idx = np.searchsorted(class_order, labels)
    for _ in range(cfg.classifier_steps):
        classes = rng.integers(class_order.size, size=cfg.classifier_batch)
        picks = np.array([pools[c][rng.integers(pools[c].size)] for c in classes])
        logits, cache = net.forward(features[picks])
        _, g_logits = softmax_cross_entropy(logits, label_idx[picks])
        grads, _ = net.backward(cache, g_logits)
        adam_step(net.parameters(), grads, opt)
    return FinalClassifier(net=net, class_ids=class_order)
