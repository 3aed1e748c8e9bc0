"""Command-line pipeline driver.

Subcommands mirror the pipeline stages (synth, align, refine, generate,
eval), plus `run-all` for seeded ablation sweeps and `project` for the 2-D
semantic-space coordinates. Global flags: --seed and --config (a JSON file
with ExperimentConfig fields).
"""

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .align import AlignedSpace, compute_dark_knowledge, encode, train_alignment
from .config import ExperimentConfig, make_rng
from .data import SyntheticSpec, generate_synthetic, load_bundle, save_bundle, training_rows
from .evaluate import AblationCase, compute_metrics, emit_projection, predict, run_experiment
from .gan import FinalClassifier, synthesize_unseen, train_final_classifier, train_gan
from .matrixio import read_matrix, write_matrix
from .nets import load_checkpoint, save_checkpoint
from .refine import refine_semantics


def _load_config(args):
    cfg = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def _save_space(space, out):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out / "encoder.ckpt", space.encoder)
    save_checkpoint(out / "seen_classifier.ckpt", space.seen_classifier)
    save_checkpoint(out / "domain_classifier.ckpt", space.domain_classifier)
    doc = {
        "d_psi": int(space.d_psi),
        "seen_class_ids": [int(c) for c in space.seen_class_ids],
        "seen_domain_ids": [int(d) for d in space.seen_domain_ids],
    }
    (out / "space.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def _load_space(path):
    path = Path(path)
    doc = json.loads((path / "space.json").read_text(encoding="utf-8"))
    return AlignedSpace(
        encoder=load_checkpoint(path / "encoder.ckpt"),
        seen_classifier=load_checkpoint(path / "seen_classifier.ckpt"),
        domain_classifier=load_checkpoint(path / "domain_classifier.ckpt"),
        d_psi=doc["d_psi"],
        seen_class_ids=np.asarray(doc["seen_class_ids"]),
        seen_domain_ids=np.asarray(doc["seen_domain_ids"]),
    )


def cmd_synth(args, cfg):
    spec = SyntheticSpec(
        n_classes=args.classes,
        n_domains=args.domains,
        d_latent=args.latent,
        d_feat=args.feat,
        d_sem_intrinsic=args.sem_intrinsic,
        d_sem_noise=args.sem_noise,
        samples_per_class_per_domain=args.samples,
        domain_transform_scale=args.transform_scale,
        noise_sigma=args.noise_sigma,
        unseen_fraction=args.unseen_fraction,
        val_fraction=args.val_fraction,
        seed=cfg.seed,
    )
    bundle, manifest = generate_synthetic(spec)
    save_bundle(bundle, manifest, args.out)
    print(f"wrote synthetic bundle: {bundle.n_samples} samples, "
          f"{bundle.n_classes} classes, {bundle.n_domains} domains -> {args.out}")


def cmd_align(args, cfg):
    bundle, manifest = load_bundle(args.bundle)
    space, history = train_alignment(bundle, manifest, cfg, make_rng(cfg.seed))
    _save_space(space, args.out)
    dark = compute_dark_knowledge(space, bundle, manifest, cfg.temperature)
    write_matrix(Path(args.out) / "dark_knowledge.mtx1", dark.prototypes)
    loss_c, loss_d = history[-1]
    print(f"alignment done after {len(history)} steps "
          f"(class loss {loss_c:.4f}, domain loss {loss_d:.4f}) -> {args.out}")


def cmd_refine(args, cfg):
    bundle, manifest = load_bundle(args.bundle)
    space = _load_space(args.aligned)
    dark_prototypes = read_matrix(Path(args.aligned) / "dark_knowledge.mtx1")
    from .align import DarkKnowledgeTable

    dark = DarkKnowledgeTable(prototypes=dark_prototypes, temperature=cfg.temperature)
    refiner, trace = refine_semantics(
        space, dark, bundle, manifest, cfg, make_rng(cfg.seed),
        use_isa=not args.no_isa, use_umg=not args.no_umg,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out / "refiner.ckpt", refiner.net)
    write_matrix(out / "refined_semantics.mtx1", refiner.encode(bundle.semantics))
    with open(out / "trace.csv", "w", encoding="utf-8", newline="") as fp:
        writer = csv.writer(fp)
        writer.writerow(["step", "L_s", "L_meta", "L_total"])
        for step, loss_sim, loss_meta, total in trace:
            writer.writerow([step, f"{loss_sim:.10g}", f"{loss_meta:.10g}", f"{total:.10g}"])
    print(f"refinement done after {len(trace)} steps -> {out}")


def cmd_generate(args, cfg):
    bundle, manifest = load_bundle(args.bundle)
    space = _load_space(args.aligned)
    refined_all = read_matrix(Path(args.refined) / "refined_semantics.mtx1")
    rows = training_rows(bundle, manifest)
    psi_train = encode(space, bundle.features[rows])
    train_class_ids = bundle.class_ids[rows]
    gan, _ = train_gan(psi_train, train_class_ids, refined_all, cfg, make_rng(cfg.seed))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out / "generator.ckpt", gan.generator)
    save_checkpoint(out / "critic.ckpt", gan.critic)
    unseen_ids = np.asarray(manifest.unseen_classes)
    fake = synthesize_unseen(
        gan, refined_all[unseen_ids], unseen_ids, cfg.per_class_count, make_rng(cfg.seed + 1)
    )
    write_matrix(out / "fake_unseen.mtx1", fake.fake_features)
    with open(out / "fake_labels.csv", "w", encoding="utf-8", newline="") as fp:
        writer = csv.writer(fp)
        writer.writerow(["row", "class_id"])
        for i, class_id in enumerate(fake.fake_class_ids):
            writer.writerow([i, int(class_id)])
    classifier = train_final_classifier(
        psi_train, train_class_ids, fake.fake_features, fake.fake_class_ids,
        class_order=sorted(set(manifest.seen_classes) | set(manifest.unseen_classes)),
        cfg=cfg, rng=make_rng(cfg.seed + 2),
    )
    save_checkpoint(out / "Cc.ckpt", classifier.net)
    (out / "classifier.json").write_text(
        json.dumps({"class_ids": [int(c) for c in classifier.class_ids]}) + "\n",
        encoding="utf-8",
    )
    print(f"generation done: {fake.fake_features.shape[0]} fake rows -> {out}")


def cmd_eval(args, cfg):
    bundle, manifest = load_bundle(args.bundle)
    space = _load_space(args.aligned)
    if args.refined:
        read_matrix(Path(args.refined) / "refined_semantics.mtx1")  # existence/format check
    gan_dir = Path(args.gan)
    classifier = FinalClassifier(
        net=load_checkpoint(gan_dir / "Cc.ckpt"),
        class_ids=np.asarray(
            json.loads((gan_dir / "classifier.json").read_text(encoding="utf-8"))["class_ids"]
        ),
    )
    from .data import evaluation_rows

    rows = evaluation_rows(bundle, manifest, include_val_as_seen=cfg.include_val_as_seen)
    predictions = predict(space, classifier, bundle.features[rows])
    metrics = compute_metrics(
        predictions, bundle.class_ids[rows], manifest,
        include_val_as_seen=cfg.include_val_as_seen,
    )
    doc = {
        "S": metrics.seen_accuracy,
        "U": metrics.unseen_accuracy,
        "H": metrics.harmonic,
        "per_class_accuracy": {
            bundle.class_names[c]: acc for c, acc in sorted(metrics.per_class.items())
        },
    }
    Path(args.out).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    print(f"S={metrics.seen_accuracy:.4f} U={metrics.unseen_accuracy:.4f} "
          f"H={metrics.harmonic:.4f} -> {args.out}")


def cmd_run_all(args, cfg):
    bundle, manifest = load_bundle(args.bundle)
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [cfg.seed]
    cases = list(args.ablation) if args.ablation else ["a", "b", "c", "d"]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for case in cases:
        for seed in seeds:
            metrics, _ = run_experiment(
                bundle, manifest, cfg, AblationCase.from_letter(case), seed
            )
            rows.append((case, seed, metrics.seen_accuracy, metrics.unseen_accuracy,
                         metrics.harmonic))
            run_dir = out / f"case_{case}_seed_{seed}"
            run_dir.mkdir(exist_ok=True)
            (run_dir / "metrics.json").write_text(
                json.dumps({"S": rows[-1][2], "U": rows[-1][3], "H": rows[-1][4]}, indent=2)
                + "\n",
                encoding="utf-8",
            )
            print(f"case {case} seed {seed}: S={rows[-1][2]:.4f} "
                  f"U={rows[-1][3]:.4f} H={rows[-1][4]:.4f}")
    with open(out / "summary.csv", "w", encoding="utf-8", newline="") as fp:
        writer = csv.writer(fp)
        writer.writerow(["case", "seed", "S", "U", "H"])
        for case, seed, s, u, h in rows:
            writer.writerow([case, seed, f"{s:.10g}", f"{u:.10g}", f"{h:.10g}"])
    print(f"summary -> {out / 'summary.csv'}")


def cmd_project(args, cfg):
    bundle, _ = load_bundle(args.bundle)
    refined = read_matrix(Path(args.refined) / "refined_semantics.mtx1")
    emit_projection(bundle.semantics, refined, bundle.class_names, args.out)
    print(f"projection -> {args.out}")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cdgzsl",
        description="Cross-domain generalized zero-shot learning pipeline on embedding bundles.",
    )
    parser.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    parser.add_argument("--config", type=str, default=None, help="JSON config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the synthetic multi-domain benchmark")
    p.add_argument("--out", required=True)
    p.add_argument("--classes", type=int, default=SyntheticSpec.n_classes)
    p.add_argument("--domains", type=int, default=SyntheticSpec.n_domains)
    p.add_argument("--latent", type=int, default=SyntheticSpec.d_latent)
    p.add_argument("--feat", type=int, default=SyntheticSpec.d_feat)
    p.add_argument("--sem-intrinsic", type=int, default=SyntheticSpec.d_sem_intrinsic)
    p.add_argument("--sem-noise", type=int, default=SyntheticSpec.d_sem_noise)
    p.add_argument("--samples", type=int, default=SyntheticSpec.samples_per_class_per_domain)
    p.add_argument("--transform-scale", type=float, default=SyntheticSpec.domain_transform_scale)
    p.add_argument("--noise-sigma", type=float, default=SyntheticSpec.noise_sigma)
    p.add_argument("--unseen-fraction", type=float, default=SyntheticSpec.unseen_fraction)
    p.add_argument("--val-fraction", type=float, default=SyntheticSpec.val_fraction)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("align", help="train the common feature space")
    p.add_argument("--bundle", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("refine", help="train the semantic encoder")
    p.add_argument("--bundle", required=True)
    p.add_argument("--aligned", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-isa", action="store_true", help="drop the similarity-alignment loss")
    p.add_argument("--no-umg", action="store_true", help="drop the meta-generation loss")
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("generate", help="train the feature generator and final classifier")
    p.add_argument("--bundle", required=True)
    p.add_argument("--aligned", required=True)
    p.add_argument("--refined", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("eval", help="score the unseen-domain test set")
    p.add_argument("--bundle", required=True)
    p.add_argument("--aligned", required=True)
    p.add_argument("--refined", default=None)
    p.add_argument("--gan", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("run-all", help="full pipeline over ablation cases and seeds")
    p.add_argument("--bundle", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ablation", default=None,
                   help="cases to run, e.g. 'ad' (default: all four)")
    p.add_argument("--seeds", default=None, help="comma-separated seed list")
    p.set_defaults(func=cmd_run_all)

    p = sub.add_parser("project", help="emit 2-D semantic-space coordinates")
    p.add_argument("--bundle", required=True)
    p.add_argument("--refined", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_project)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args)
        args.func(args, cfg)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
