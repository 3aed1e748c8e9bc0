"""Inference, seen/unseen accuracy metrics, 2-D projections, and the
ablation experiment harness that chains all pipeline stages."""

import csv
from dataclasses import dataclass, field

import numpy as np

from .align import compute_dark_knowledge, encode, train_alignment
from .config import make_rng
from .data import evaluation_rows, training_rows
from .gan import synthesize_unseen, train_final_classifier, train_gan
from .linops import pca_two
from .refine import identity_encoder, refine_semantics


@dataclass
class GzslMetrics:
    seen_accuracy: float     # per-sample accuracy on unseen-domain seen-class samples
    unseen_accuracy: float   # per-sample accuracy on unseen-domain unseen-class samples
    harmonic: float
    per_class: dict = field(default_factory=dict)  # class id -> accuracy


@dataclass(frozen=True)
class AblationCase:
    use_isa: bool
    use_umg: bool

    @classmethod
    def from_letter(cls, letter):
        table = {
            "a": cls(False, False),
            "b": cls(True, False),
            "c": cls(False, True),
            "d": cls(True, True),
        }
        if letter not in table:
            raise ValueError(f"unknown ablation case {letter!r}, expected a/b/c/d")
        return table[letter]


def harmonic_mean(seen, unseen):
    if seen + unseen <= 0:
        return 0.0
    return 2.0 * seen * unseen / (seen + unseen)


def predict(space, classifier, features):
    """Class ids for raw test features: argmax of the final classifier over
    encoded features; ties resolve to the lowest class id."""
    psi = encode(space, features)
    logits, _ = classifier.net.forward(psi)
    return classifier.class_ids[np.argmax(logits, axis=1)]


def compute_metrics(predictions, truths, manifest, include_val_as_seen=False):
    """Seen/unseen per-sample accuracies and their harmonic mean."""
    predictions = np.asarray(predictions)
    truths = np.asarray(truths)
    if predictions.shape != truths.shape:
        raise ValueError("predictions and truths differ in length")
    seen = set(manifest.seen_classes)
    if include_val_as_seen:
        seen |= set(manifest.val_classes)
    unseen = set(manifest.unseen_classes)
    stray = set(np.unique(truths)) - seen - unseen
    if stray:
        raise ValueError(f"test labels outside the scored classes: {sorted(stray)}")
    seen_mask = np.isin(truths, sorted(seen))
    unseen_mask = np.isin(truths, sorted(unseen))
    if not seen_mask.any():
        raise ValueError("empty seen test partition")
    if not unseen_mask.any():
        raise ValueError("empty unseen test partition")
    correct = predictions == truths
    s = float(correct[seen_mask].mean())
    u = float(correct[unseen_mask].mean())
    per_class = {
        int(c): float(correct[truths == c].mean()) for c in np.unique(truths)
    }
    return GzslMetrics(
        seen_accuracy=s,
        unseen_accuracy=u,
        harmonic=harmonic_mean(s, u),
        per_class=per_class,
    )


def emit_projection(original_semantics, refined_semantics, class_names, out_path):
    """Write 2-D principal-component coordinates of both semantic spaces.

    CSV columns: class,space,x,y with space in {original, refined}; each
    space is projected independently.
    """
    original = np.asarray(original_semantics)
    refined = np.asarray(refined_semantics)
    if original.shape[0] != len(class_names) or refined.shape[0] != len(class_names):
        raise ValueError("one row per class required in both semantic matrices")
    coords = {
        "original": pca_two(original)[0],
        "refined": pca_two(refined)[0],
    }
    with open(out_path, "w", encoding="utf-8", newline="") as fp:
        writer = csv.writer(fp)
        writer.writerow(["class", "space", "x", "y"])
        for space_name in ("original", "refined"):
            for name, (x, y) in zip(class_names, coords[space_name]):
                writer.writerow([name, space_name, f"{x:.10g}", f"{y:.10g}"])


def run_experiment(bundle, manifest, cfg, ablation, seed):
    """Full pipeline: align, refine (per ablation flags), generate, evaluate.

    With both flags off the generator conditions on the original semantics
    through an untrained pass-through encoder. Deterministic given
    (bundle, cfg, ablation, seed): each stage draws from its own stream
    spawned from the seed in fixed order.
    """
    streams = np.random.SeedSequence(seed).spawn(5)
    space, align_history = train_alignment(bundle, manifest, cfg, make_rng(streams[0]))

    if ablation.use_isa or ablation.use_umg:
        dark = compute_dark_knowledge(space, bundle, manifest, cfg.temperature)
        refiner, trace = refine_semantics(
            space, dark, bundle, manifest, cfg, make_rng(streams[1]),
            use_isa=ablation.use_isa, use_umg=ablation.use_umg,
        )
    else:
        dark = None
        refiner = identity_encoder(bundle.d_sem)
        trace = []
    refined_all = refiner.encode(bundle.semantics)

    rows = training_rows(bundle, manifest)
    psi_train = encode(space, bundle.features[rows])
    train_class_ids = bundle.class_ids[rows]
    gan, gan_trace = train_gan(psi_train, train_class_ids, refined_all, cfg, make_rng(streams[2]))

    unseen_ids = np.asarray(manifest.unseen_classes)
    fake = synthesize_unseen(
        gan, refined_all[unseen_ids], unseen_ids, cfg.per_class_count, make_rng(streams[3])
    )
    classifier = train_final_classifier(
        psi_train, train_class_ids, fake.fake_features, fake.fake_class_ids,
        class_order=sorted(set(manifest.seen_classes) | set(manifest.unseen_classes)),
        cfg=cfg, rng=make_rng(streams[4]),
    )

    eval_rows = evaluation_rows(bundle, manifest, include_val_as_seen=cfg.include_val_as_seen)
    predictions = predict(space, classifier, bundle.features[eval_rows])
    metrics = compute_metrics(
        predictions, bundle.class_ids[eval_rows], manifest,
        include_val_as_seen=cfg.include_val_as_seen,
    )
    artifacts = {
        "space": space,
        "align_history": align_history,
        "dark": dark,
        "refiner": refiner,
        "refine_trace": trace,
        "gan": gan,
        "gan_trace": gan_trace,
        "fake": fake,
        "classifier": classifier,
    }
    return metrics, artifacts
