"""Multi-domain embedding bundles: data model, on-disk format, synthetic benchmark.

A bundle directory holds `manifest.json`, an MTX1 feature matrix, an MTX1
per-class semantic matrix, and `labels.csv` (sample_id,class_id,domain_id).
The same layout is produced by the companion ingestion tool, so validation
here is strict and every failure names the offending file and field.

The synthetic generator builds a desk-scale stand-in for multi-domain image
benchmarks: class prototypes live in a low-dimensional latent space, each
domain observes them through its own near-orthogonal affine map, and the
semantic vector for a class is its latent prototype (the intrinsic block)
concatenated with per-class random dimensions that carry no information
about the features (the non-intrinsic block).
"""

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .matrixio import MatrixFormatError, read_matrix, write_matrix


class BundleError(ValueError):
    """A bundle directory or in-memory bundle violates the format contract."""


@dataclass(frozen=True)
class DatasetBundle:
    features: np.ndarray     # [n_samples, d_feat] float32
    class_ids: np.ndarray    # [n_samples] int
    domain_ids: np.ndarray   # [n_samples] int
    semantics: np.ndarray    # [n_classes, d_sem] float32
    class_names: tuple
    domain_names: tuple

    @property
    def n_samples(self):
        return self.features.shape[0]

    @property
    def n_classes(self):
        return len(self.class_names)

    @property
    def n_domains(self):
        return len(self.domain_names)

    @property
    def d_feat(self):
        return self.features.shape[1]

    @property
    def d_sem(self):
        return self.semantics.shape[1]


@dataclass(frozen=True)
class SplitManifest:
    seen_domains: tuple
    unseen_domain: int
    seen_classes: tuple
    unseen_classes: tuple
    val_classes: tuple


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the synthetic multi-domain benchmark generator."""

    n_classes: int = 40
    n_domains: int = 4
    d_latent: int = 4
    d_feat: int = 32
    d_sem_intrinsic: int = 4
    d_sem_noise: int = 8
    samples_per_class_per_domain: int = 30
    domain_transform_scale: float = 0.1
    noise_sigma: float = 0.1
    unseen_fraction: float = 0.25
    val_fraction: float = 0.0
    seed: int = 0

    def validate(self):
        counts = {
            "n_classes": self.n_classes,
            "n_domains": self.n_domains,
            "d_latent": self.d_latent,
            "d_feat": self.d_feat,
            "d_sem_intrinsic": self.d_sem_intrinsic,
            "samples_per_class_per_domain": self.samples_per_class_per_domain,
        }
        for name, value in counts.items():
            if value < 1:
                raise BundleError(f"synthetic spec: {name} must be >= 1, got {value}")
        if self.d_sem_noise < 0:
            raise BundleError("synthetic spec: d_sem_noise must be >= 0")
        if self.d_sem_intrinsic < self.d_latent:
            raise BundleError("synthetic spec: d_sem_intrinsic must be >= d_latent")
        if self.d_feat < self.d_latent:
            raise BundleError("synthetic spec: d_feat must be >= d_latent")
        if self.n_domains < 3:
            raise BundleError("synthetic spec: need >= 3 domains (2 seen + 1 unseen)")
        n_unseen = max(1, round(self.unseen_fraction * self.n_classes))
        n_val = round(self.val_fraction * self.n_classes)
        if self.n_classes - n_unseen - n_val < 2:
            raise BundleError("synthetic spec: fewer than 2 seen classes after split")
        return n_unseen, n_val


def validate_bundle(bundle, manifest, source="<memory>"):
    """Check every bundle/split invariant; raise BundleError naming file and field."""
    n_classes = bundle.n_classes
    n_domains = bundle.n_domains
    if bundle.features.ndim != 2 or bundle.features.shape[0] == 0:
        raise BundleError(f"{source}/features: zero samples")
    if bundle.class_ids.shape != (bundle.n_samples,) or bundle.domain_ids.shape != (bundle.n_samples,):
        raise BundleError(f"{source}/labels.csv: label count does not match feature rows")
    if bundle.class_ids.size and (bundle.class_ids.min() < 0 or bundle.class_ids.max() >= n_classes):
        raise BundleError(
            f"{source}/labels.csv: class_id out of range [0, {n_classes}) "
            f"(max seen {int(bundle.class_ids.max())})"
        )
    if bundle.domain_ids.size and (bundle.domain_ids.min() < 0 or bundle.domain_ids.max() >= n_domains):
        raise BundleError(
            f"{source}/labels.csv: domain_id out of range [0, {n_domains}) "
            f"(max seen {int(bundle.domain_ids.max())})"
        )
    if bundle.semantics.shape[0] != n_classes:
        raise BundleError(
            f"{source}/semantics: {bundle.semantics.shape[0]} rows for {n_classes} classes"
        )
    if not np.isfinite(bundle.features).all():
        raise BundleError(f"{source}/features: non-finite values")
    if not np.isfinite(bundle.semantics).all():
        raise BundleError(f"{source}/semantics: non-finite values")

    seen_d = set(manifest.seen_domains)
    if manifest.unseen_domain in seen_d:
        raise BundleError(f"{source}/manifest.json: splits.unseen_domain overlaps seen_domains")
    if len(seen_d) < 2:
        raise BundleError(f"{source}/manifest.json: splits.seen_domains needs at least 2 domains")
    for field_name, ids in (
        ("seen_domains", manifest.seen_domains),
        ("unseen_domain", (manifest.unseen_domain,)),
    ):
        for d in ids:
            if not 0 <= d < n_domains:
                raise BundleError(f"{source}/manifest.json: splits.{field_name} id {d} out of range")
    groups = {
        "seen_classes": set(manifest.seen_classes),
        "unseen_classes": set(manifest.unseen_classes),
        "val_classes": set(manifest.val_classes),
    }
    for field_name, ids in groups.items():
        for c in ids:
            if not 0 <= c < n_classes:
                raise BundleError(f"{source}/manifest.json: splits.{field_name} id {c} out of range")
    names = list(groups)
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            overlap = groups[names[i]] & groups[names[j]]
            if overlap:
                raise BundleError(
                    f"{source}/manifest.json: splits.{names[i]} and splits.{names[j]} "
                    f"share class {min(overlap)}"
                )


def save_bundle(bundle, manifest, path):
    """Write a bundle directory (manifest.json, MTX1 matrices, labels.csv)."""
    validate_bundle(bundle, manifest, source=str(path))
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    files = {"features": "features.mtx1", "labels": "labels.csv", "semantics": "semantics.mtx1"}
    doc = {
        "class_names": list(bundle.class_names),
        "domain_names": list(bundle.domain_names),
        "d_feat": int(bundle.d_feat),
        "d_sem": int(bundle.d_sem),
        "splits": {
            "seen_domains": [int(d) for d in manifest.seen_domains],
            "unseen_domain": int(manifest.unseen_domain),
            "seen_classes": [int(c) for c in manifest.seen_classes],
            "unseen_classes": [int(c) for c in manifest.unseen_classes],
            "val_classes": [int(c) for c in manifest.val_classes],
        },
        "files": files,
    }
    with open(path / "manifest.json", "w", encoding="utf-8") as fp:
        json.dump(doc, fp, indent=2)
        fp.write("\n")
    write_matrix(path / files["features"], bundle.features)
    write_matrix(path / files["semantics"], bundle.semantics)
    with open(path / files["labels"], "w", encoding="utf-8", newline="") as fp:
        writer = csv.writer(fp)
        writer.writerow(["sample_id", "class_id", "domain_id"])
        for i in range(bundle.n_samples):
            writer.writerow([i, int(bundle.class_ids[i]), int(bundle.domain_ids[i])])


def _require(doc, key, filename):
    if key not in doc:
        raise BundleError(f"{filename}: missing field {key!r}")
    return doc[key]


def load_bundle(path):
    """Load and fully validate a bundle directory; returns (bundle, manifest)."""
    path = Path(path)
    manifest_path = path / "manifest.json"
    if not manifest_path.is_file():
        raise BundleError(f"{manifest_path}: missing file")
    try:
        doc = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise BundleError(f"{manifest_path}: invalid JSON ({exc})") from exc

    class_names = tuple(_require(doc, "class_names", "manifest.json"))
    domain_names = tuple(_require(doc, "domain_names", "manifest.json"))
    d_feat = _require(doc, "d_feat", "manifest.json")
    d_sem = _require(doc, "d_sem", "manifest.json")
    splits = _require(doc, "splits", "manifest.json")
    files = _require(doc, "files", "manifest.json")
    for key in ("seen_domains", "unseen_domain", "seen_classes", "unseen_classes", "val_classes"):
        _require(splits, key, "manifest.json (splits)")
    for key in ("features", "labels", "semantics"):
        _require(files, key, "manifest.json (files)")

    matrices = {}
    for key in ("features", "semantics"):
        mpath = path / files[key]
        if not mpath.is_file():
            raise BundleError(f"{mpath}: missing file")
        try:
            matrices[key] = read_matrix(mpath)
        except MatrixFormatError as exc:
            raise BundleError(str(exc)) from exc
    if matrices["features"].shape[1] != d_feat:
        raise BundleError(
            f"{files['features']}: {matrices['features'].shape[1]} columns, manifest d_feat={d_feat}"
        )
    if matrices["semantics"].shape[1] != d_sem:
        raise BundleError(
            f"{files['semantics']}: {matrices['semantics'].shape[1]} columns, manifest d_sem={d_sem}"
        )

    labels_path = path / files["labels"]
    if not labels_path.is_file():
        raise BundleError(f"{labels_path}: missing file")
    class_ids, domain_ids = [], []
    with open(labels_path, encoding="utf-8", newline="") as fp:
        reader = csv.reader(fp)
        header = next(reader, None)
        if header != ["sample_id", "class_id", "domain_id"]:
            raise BundleError(f"{files['labels']}: bad header {header!r}")
        for row_num, row in enumerate(reader):
            if len(row) != 3:
                raise BundleError(f"{files['labels']}: row {row_num} has {len(row)} fields")
            sample_id, class_id, domain_id = (int(v) for v in row)
            if sample_id != row_num:
                raise BundleError(
                    f"{files['labels']}: sample_id {sample_id} at row {row_num} is not the row index"
                )
            class_ids.append(class_id)
            domain_ids.append(domain_id)
    if len(class_ids) != matrices["features"].shape[0]:
        raise BundleError(
            f"{files['labels']}: {len(class_ids)} rows for {matrices['features'].shape[0]} samples"
        )

    bundle = DatasetBundle(
        features=matrices["features"],
        class_ids=np.asarray(class_ids, dtype=np.int64),
        domain_ids=np.asarray(domain_ids, dtype=np.int64),
        semantics=matrices["semantics"],
        class_names=class_names,
        domain_names=domain_names,
    )
    manifest = SplitManifest(
        seen_domains=tuple(sorted(int(d) for d in splits["seen_domains"])),
        unseen_domain=int(splits["unseen_domain"]),
        seen_classes=tuple(sorted(int(c) for c in splits["seen_classes"])),
        unseen_classes=tuple(sorted(int(c) for c in splits["unseen_classes"])),
        val_classes=tuple(sorted(int(c) for c in splits["val_classes"])),
    )
    validate_bundle(bundle, manifest, source=str(path))
    return bundle, manifest


def generate_synthetic(spec):
    """Build a synthetic bundle + splits from a SyntheticSpec.

    Deterministic given the spec: all draws come from PCG64 streams spawned
    from the 64-bit seed in a fixed order (prototypes, domain maps, sample
    noise, semantic noise), so changing the semantic-noise width can never
    change the features. Feature construction per domain d and class y is
    Q_d @ c_y + t_d plus isotropic sample noise, where Q_d is an orthonormal
    basis perturbed by `domain_transform_scale` and t_d is a same-scale
    offset. The final domain and the last block of classes are held out.
    """
    n_unseen, n_val = spec.validate()
    streams = np.random.SeedSequence(spec.seed).spawn(4)
    rng_proto = np.random.Generator(np.random.PCG64(streams[0]))
    rng_domain = np.random.Generator(np.random.PCG64(streams[1]))
    rng_sample = np.random.Generator(np.random.PCG64(streams[2]))
    rng_sem = np.random.Generator(np.random.PCG64(streams[3]))

    prototypes = 3.0 * rng_proto.standard_normal((spec.n_classes, spec.d_latent))

    base = rng_domain.standard_normal((spec.d_feat, spec.d_latent))
    q_base, r = np.linalg.qr(base)
    q_base = q_base * np.sign(np.diag(r))
    domain_maps = []
    for _ in range(spec.n_domains):
        pert = rng_domain.standard_normal((spec.d_feat, spec.d_latent))
        offset = rng_domain.standard_normal(spec.d_feat)
        domain_maps.append(
            (q_base + spec.domain_transform_scale * pert, spec.domain_transform_scale * offset)
        )

    spc = spec.samples_per_class_per_domain
    n_samples = spec.n_classes * spec.n_domains * spc
    features = np.empty((n_samples, spec.d_feat))
    class_ids = np.empty(n_samples, dtype=np.int64)
    domain_ids = np.empty(n_samples, dtype=np.int64)
    row = 0
    for y in range(spec.n_classes):
        for d in range(spec.n_domains):
            q, t = domain_maps[d]
            center = q @ prototypes[y] + t
            block = center + spec.noise_sigma * rng_sample.standard_normal((spc, spec.d_feat))
            features[row : row + spc] = block
            class_ids[row : row + spc] = y
            domain_ids[row : row + spc] = d
            row += spc

    intrinsic = np.zeros((spec.n_classes, spec.d_sem_intrinsic))
    intrinsic[:, : spec.d_latent] = prototypes
    # non-intrinsic block dominates the raw semantic geometry, mimicking
    # verbose class descriptions where most of the text carries no
    # cross-domain visual information
    noise_block = 10.0 * rng_sem.standard_normal((spec.n_classes, spec.d_sem_noise))
    semantics = np.concatenate([intrinsic, noise_block], axis=1)

    unseen_classes = tuple(range(spec.n_classes - n_unseen, spec.n_classes))
    val_classes = tuple(range(spec.n_classes - n_unseen - n_val, spec.n_classes - n_unseen))
    seen_classes = tuple(range(spec.n_classes - n_unseen - n_val))

    bundle = DatasetBundle(
        features=features.astype(np.float32),
        class_ids=class_ids,
        domain_ids=domain_ids,
        semantics=semantics.astype(np.float32),
        class_names=tuple(f"class_{y:03d}" for y in range(spec.n_classes)),
        domain_names=tuple(f"domain_{d}" for d in range(spec.n_domains)),
    )
    manifest = SplitManifest(
        seen_domains=tuple(range(spec.n_domains - 1)),
        unseen_domain=spec.n_domains - 1,
        seen_classes=seen_classes,
        unseen_classes=unseen_classes,
        val_classes=val_classes,
    )
    validate_bundle(bundle, manifest, source="synthetic")
    return bundle, manifest


def training_rows(bundle, manifest):
    """Row indices of the training set: seen classes in seen domains."""
    seen_c = np.isin(bundle.class_ids, manifest.seen_classes)
    seen_d = np.isin(bundle.domain_ids, manifest.seen_domains)
    return np.flatnonzero(seen_c & seen_d)


def evaluation_rows(bundle, manifest, include_val_as_seen=False):
    """Row indices of the evaluation set: unseen-domain samples of scored classes."""
    scored = set(manifest.seen_classes) | set(manifest.unseen_classes)
    if include_val_as_seen:
        scored |= set(manifest.val_classes)
    in_domain = bundle.domain_ids == manifest.unseen_domain
    in_classes = np.isin(bundle.class_ids, sorted(scored))
    rows = np.flatnonzero(in_domain & in_classes)
    assert (bundle.domain_ids[rows] == manifest.unseen_domain).all()
    return rows
