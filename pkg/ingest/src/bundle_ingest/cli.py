"""`ingest` command: compile an image-folder dataset plus a semantic source
into a portable embedding bundle."""

import argparse
import json
import logging
import sys
from pathlib import Path

from .backbones import extract_features
from .bundle_writer import write_bundle
from .manifest import IngestManifest, discover_domains
from .semantics import embed_semantics


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ingest",
        description="Compile images + class semantics into an embedding bundle.",
    )
    parser.add_argument("--root", required=True, help="dataset root (domain/class/image folders)")
    parser.add_argument("--semantics", required=True,
                        help="attribute CSV file or directory of per-class description texts")
    parser.add_argument("--splits", required=True,
                        help="JSON file with seen_domains/unseen_domain/seen_classes/"
                             "unseen_classes/val_classes (names or ids)")
    parser.add_argument("--out", required=True, help="output bundle directory")
    parser.add_argument("--domains", default=None,
                        help="comma-separated domain folder order (default: sorted)")
    parser.add_argument("--backbone", default="resnet50",
                        choices=["resnet50", "resnet50-untrained", "pixelstats"])
    parser.add_argument("--embedder", default="hashing-64",
                        help="text embedder: hashing-<dim> or sbert:<model>")
    return parser


def run(args):
    semantic_path = Path(args.semantics)
    manifest = IngestManifest(
        dataset_root=Path(args.root),
        domain_folder_names=(args.domains.split(",") if args.domains
                             else discover_domains(args.root)),
        backbone_name=args.backbone,
        text_embedder_name=args.embedder,
        semantic_source="attribute_csv" if semantic_path.is_file() else "llm_text_dir",
        semantic_path=semantic_path,
    ).validate()

    features, class_ids, domain_ids = extract_features(manifest)
    semantics = embed_semantics(manifest)
    with open(args.splits, encoding="utf-8") as fp:
        splits = json.load(fp)
    write_bundle(features, class_ids, domain_ids, semantics,
                 manifest.class_names, manifest.domain_folder_names, splits, args.out)
    print(f"wrote bundle: {features.shape[0]} samples, {len(manifest.class_names)} classes, "
          f"{len(manifest.domain_folder_names)} domains, d_feat={features.shape[1]}, "
          f"d_sem={semantics.shape[1]} -> {args.out}")


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        run(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
