"""Adversarial construction of the common feature space.

A data encoder is trained jointly with a seen-class classifier (minimizing
class cross-entropy) and against a domain classifier via a gradient-reversal
path: forward is the identity, backward feeds -lambda times the domain-loss
gradient into the encoder. After training, per-class tempered-softmax
prototypes ("dark knowledge") and their cosine-similarity matrix summarize
the class geometry of the space.
"""

from dataclasses import dataclass

import numpy as np

from .data import training_rows
from .linops import unit_rows
from .nets import (
    FeedForwardNet,
    adam_init,
    adam_step,
    softmax_cross_entropy,
    softmax_with_temperature,
)


@dataclass
class AlignedSpace:
    encoder: FeedForwardNet          # data encoder into the common space
    seen_classifier: FeedForwardNet  # logits over seen classes
    domain_classifier: FeedForwardNet
    d_psi: int
    seen_class_ids: np.ndarray       # logit index -> original class id (sorted)
    seen_domain_ids: np.ndarray      # domain-logit index -> original domain id (sorted)


@dataclass
class DarkKnowledgeTable:
    prototypes: np.ndarray  # [n_seen, n_seen], row t = mean tempered softmax of class t
    temperature: float


@dataclass
class SimilarityMatrix:
    entries: np.ndarray  # [n, n] pairwise cosines
    source: str          # "dark_knowledge" or "refined_semantics"


def similarity_matrix(rows, source="dark_knowledge"):
    """Pairwise cosine similarities of the rows of a matrix."""
    unit, _ = unit_rows(np.asarray(rows, dtype=np.float64))
    entries = unit @ unit.T
    entries = 0.5 * (entries + entries.T)
    np.clip(entries, -1.0, 1.0, out=entries)
    np.fill_diagonal(entries, 1.0)
    return SimilarityMatrix(entries=entries, source=source)


def index_of(ids, universe):
    """Map each id to its position in the sorted `universe` array."""
    universe = np.asarray(universe)
    pos = np.searchsorted(universe, ids)
    if (pos >= universe.size).any() or (universe[np.minimum(pos, universe.size - 1)] != ids).any():
        raise ValueError("id outside the expected set")
    return pos


def alignment_grads(encoder, seen_classifier, domain_classifier, x, class_idx, domain_idx, lam):
    """Losses and gradients of one adversarial batch.

    Returns (loss_class, loss_domain, g_encoder, g_classifier, g_domain).
    Both classifiers are trained to minimize their own cross-entropy; the
    encoder receives the class gradient plus the domain gradient scaled by
    -lam (the reversal path).
    """
    psi, cache_e = encoder.forward(x)
    logits_c, cache_c = seen_classifier.forward(psi)
    logits_d, cache_d = domain_classifier.forward(psi)
    loss_c, g_logits_c = softmax_cross_entropy(logits_c, class_idx)
    loss_d, g_logits_d = softmax_cross_entropy(logits_d, domain_idx)
    g_cls, g_psi_c = seen_classifier.backward(cache_c, g_logits_c)
    g_dom, g_psi_d = domain_classifier.backward(cache_d, g_logits_d)
    g_enc, _ = encoder.backward(cache_e, g_psi_c - lam * g_psi_d)
    return loss_c, loss_d, g_enc, g_cls, g_dom


def _balanced_batch(cells, rng, batch_size):
    """Sample indices with classes (and domains within class) drawn uniformly."""
    picks = np.empty(batch_size, dtype=np.int64)
    n_classes = len(cells)
    for i in range(batch_size):
        pools = cells[rng.integers(n_classes)]
        pool = pools[rng.integers(len(pools))]
        picks[i] = pool[rng.integers(pool.size)]
    return picks


def fit_alignment(x, class_idx, domain_idx, n_classes, n_domains, cfg, rng):
    """Adversarial training loop on pre-indexed data (labels already 0-based).

    Returns (encoder, seen_classifier, domain_classifier, history) where
    history is a list of (loss_class, loss_domain) per step.
    """
    x = np.asarray(x, dtype=np.float32)
    for d in range(n_domains):
        if not (domain_idx == d).any():
            raise ValueError(f"empty domain: no training samples for domain index {d}")

    encoder = FeedForwardNet.create(
        [x.shape[1], cfg.encoder_hidden, cfg.d_psi], [cfg.encoder_activation, "identity"], rng
    )
    seen_classifier = FeedForwardNet.create([cfg.d_psi, n_classes], ["identity"], rng)
    domain_classifier = FeedForwardNet.create([cfg.d_psi, n_domains], ["identity"], rng)
    opt_e = adam_init(encoder.parameters(), cfg.learning_rate)
    opt_c = adam_init(seen_classifier.parameters(), cfg.learning_rate)
    # faster steps keep the domain head near-optimal; the encoder then has to
    # remove domain information rather than orbit a stale decision boundary
    opt_d = adam_init(domain_classifier.parameters(), cfg.learning_rate * cfg.domain_lr_scale)

    # per class, a list of per-domain index pools (only non-empty ones)
    cells = []
    for c in range(n_classes):
        pools = []
        for d in range(n_domains):
            pool = np.flatnonzero((class_idx == c) & (domain_idx == d))
            if pool.size:
                pools.append(pool)
        if not pools:
            raise ValueError(f"no training samples for class index {c}")
        cells.append(pools)

    history = []
    bad_streak = 0
    for _ in range(cfg.align_steps):
        picks = _balanced_batch(cells, rng, cfg.batch_size)
        loss_c, loss_d, g_enc, g_cls, g_dom = alignment_grads(
            encoder, seen_classifier, domain_classifier,
            x[picks], class_idx[picks], domain_idx[picks], cfg.lambda_domain,
        )
        if not (np.isfinite(loss_c) and np.isfinite(loss_d)):
            bad_streak += 1
            if bad_streak >= 3:
                raise RuntimeError(
                    f"alignment diverged: non-finite losses for 3 consecutive batches "
                    f"(last loss_class={loss_c}, loss_domain={loss_d})"
                )
            continue
        bad_streak = 0
        adam_step(encoder.parameters(), g_enc, opt_e)
        adam_step(seen_classifier.parameters(), g_cls, opt_c)
        adam_step(domain_classifier.parameters(), g_dom, opt_d)
        history.append((loss_c, loss_d))
    return encoder, seen_classifier, domain_classifier, history


def train_alignment(bundle, manifest, cfg, rng, rows=None):
    """Train the common space on a bundle's training split.

    `rows` restricts training to a subset of the training rows (used for
    holdout evaluation); defaults to the full training split.
    """
    if rows is None:
        rows = training_rows(bundle, manifest)
    rows = np.asarray(rows)
    if rows.size == 0:
        raise ValueError("empty training split")
    seen_class_ids = np.asarray(manifest.seen_classes)
    seen_domain_ids = np.asarray(manifest.seen_domains)
    class_idx = index_of(bundle.class_ids[rows], seen_class_ids)
    domain_idx = index_of(bundle.domain_ids[rows], seen_domain_ids)
    encoder, seen_classifier, domain_classifier, history = fit_alignment(
        bundle.features[rows], class_idx, domain_idx,
        seen_class_ids.size, seen_domain_ids.size, cfg, rng,
    )
    space = AlignedSpace(
        encoder=encoder,
        seen_classifier=seen_classifier,
        domain_classifier=domain_classifier,
        d_psi=cfg.d_psi,
        seen_class_ids=seen_class_ids,
        seen_domain_ids=seen_domain_ids,
    )
    return space, history


def encode(space, features):
    """Map raw features into the common space (never reads domain labels)."""
    out, _ = space.encoder.forward(np.asarray(features, dtype=np.float32))
    return out


def compute_dark_knowledge(space, bundle, manifest, temperature):
    """Mean tempered-softmax class prototypes over all seen-domain samples.

    Rows follow the seen-class order of the space. Per-class averaging runs
    in a fixed order (bundle row order), so two bundles whose per-class
    sample sequences match produce bit-identical tables.
    """
    rows = training_rows(bundle, manifest)
    psi = encode(space, bundle.features[rows])
    logits, _ = space.seen_classifier.forward(psi)
    tempered = softmax_with_temperature(logits, temperature)
    class_ids = bundle.class_ids[rows]
    n_seen = space.seen_class_ids.size
    prototypes = np.empty((n_seen, n_seen), dtype=tempered.dtype)
    for t, class_id in enumerate(space.seen_class_ids):
        mask = class_ids == class_id
        if not mask.any():
            raise ValueError(f"class with zero samples: class id {int(class_id)}")
        prototypes[t] = tempered[mask].mean(axis=0)
    return DarkKnowledgeTable(prototypes=prototypes, temperature=float(temperature))


def fit_domain_probe(psi, domain_idx, n_domains, cfg, rng, steps=1500):
    """Train a fresh linear softmax probe predicting the domain from features."""
    psi = np.asarray(psi, dtype=np.float32)
    probe = FeedForwardNet.create([psi.shape[1], n_domains], ["identity"], rng)
    opt = adam_init(probe.parameters(), 1e-2)
    n = psi.shape[0]
    for _ in range(steps):
        picks = rng.integers(n, size=min(cfg.batch_size, n))
        logits, cache = probe.forward(psi[picks])
        _, g_logits = softmax_cross_entropy(logits, domain_idx[picks])
        grads, _ = probe.backward(cache, g_logits)
        adam_step(probe.parameters(), grads, opt)
    return probe


def classifier_accuracy(net, x, labels):
    logits, _ = net.forward(np.asarray(x, dtype=np.float32))
    return float((logits.argmax(axis=1) == labels).mean())
