"""Writer for the portable bundle directory format.

Layout contract (shared with the training library, implemented here
independently): `manifest.json`, MTX1 matrices (magic `MTX1`, u32-LE rows,
u32-LE cols, f32-LE row-major payload), and `labels.csv` with
`sample_id,class_id,domain_id` where sample_id is the feature row index.
"""

import csv
import json
import struct
from pathlib import Path

import numpy as np


def write_mtx1(path, matrix):
    arr = np.ascontiguousarray(matrix, dtype="<f4")
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {arr.shape}")
    with open(path, "wb") as fp:
        fp.write(b"MTX1")
        fp.write(struct.pack("<II", arr.shape[0], arr.shape[1]))
        fp.write(arr.tobytes(order="C"))


def resolve_ids(values, names, kind):
    """Map a splits entry given as names or integer ids onto ids."""
    out = []
    for v in values:
        if isinstance(v, int):
            if not 0 <= v < len(names):
                raise ValueError(f"{kind} id {v} out of range")
            out.append(v)
        else:
            try:
                out.append(names.index(v))
            except ValueError:
                raise ValueError(f"unknown {kind} name {v!r}") from None
    return sorted(out)


def write_bundle(features, class_ids, domain_ids, semantics, class_names,
                 domain_names, splits, out_dir):
    """Emit a bundle directory; shapes and label ranges are checked first.

    `splits` maps the five split keys to lists of names or ids (the unseen
    domain may be a bare name/id).
    """
    features = np.asarray(features, dtype=np.float32)
    semantics = np.asarray(semantics, dtype=np.float32)
    class_ids = np.asarray(class_ids)
    domain_ids = np.asarray(domain_ids)
    n = features.shape[0]
    if n == 0:
        raise ValueError("zero samples")
    if class_ids.shape != (n,) or domain_ids.shape != (n,):
        raise ValueError("label arrays do not match the feature row count")
    if semantics.shape[0] != len(class_names):
        raise ValueError(
            f"semantics rows ({semantics.shape[0]}) do not match class count ({len(class_names)})"
        )
    if class_ids.size and class_ids.max() >= len(class_names):
        raise ValueError("class_id out of range")
    if domain_ids.size and domain_ids.max() >= len(domain_names):
        raise ValueError("domain_id out of range")

    class_names = list(class_names)
    domain_names = list(domain_names)
    unseen = splits["unseen_domain"]
    unseen_id = resolve_ids([unseen], domain_names, "domain")[0]
    doc = {
        "class_names": class_names,
        "domain_names": domain_names,
        "d_feat": int(features.shape[1]),
        "d_sem": int(semantics.shape[1]),
        "splits": {
            "seen_domains": resolve_ids(splits["seen_domains"], domain_names, "domain"),
            "unseen_domain": unseen_id,
            "seen_classes": resolve_ids(splits["seen_classes"], class_names, "class"),
            "unseen_classes": resolve_ids(splits["unseen_classes"], class_names, "class"),
            "val_classes": resolve_ids(splits.get("val_classes", []), class_names, "class"),
        },
        "files": {
            "features": "features.mtx1",
            "labels": "labels.csv",
            "semantics": "semantics.mtx1",
        },
    }
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fp:
        json.dump(doc, fp, indent=2)
        fp.write("\n")
    write_mtx1(out_dir / "features.mtx1", features)
    write_mtx1(out_dir / "semantics.mtx1", semantics)
    with open(out_dir / "labels.csv", "w", encoding="utf-8", newline="") as fp:
        writer = csv.writer(fp)
        writer.writerow(["sample_id", "class_id", "domain_id"])
        for i in range(n):
            writer.writerow([i, int(class_ids[i]), int(domain_ids[i])])
