"""Class-semantics sources: attribute tables and description-text folders.

Attribute mode passes a 0/1 class-attribute CSV through unchanged. Text mode
maps one description file per class to a fixed-length vector; the default
embedder is deterministic feature hashing (no model weights needed), and a
sentence-transformer can be named instead when its weights are available.
"""

import csv
from pathlib import Path

import numpy as np


def embed_texts_hashing(texts, n_features):
    from sklearn.feature_extraction.text import HashingVectorizer

    vec = HashingVectorizer(n_features=n_features, norm="l2", alternate_sign=True)
    return vec.transform(texts).toarray().astype(np.float32)


def embed_texts_sbert(texts, model_name):
    from sentence_transformers import SentenceTransformer

    model = SentenceTransformer(model_name)
    return np.asarray(model.encode(list(texts)), dtype=np.float32)


def embed_texts(texts, embedder_name):
    if embedder_name.startswith("hashing-"):
        return embed_texts_hashing(texts, int(embedder_name.split("-", 1)[1]))
    if embedder_name.startswith("sbert:"):
        return embed_texts_sbert(texts, embedder_name.split(":", 1)[1])
    raise ValueError(f"unknown text embedder {embedder_name!r} "
                     "(expected hashing-<dim> or sbert:<model>)")


def read_attribute_csv(path, class_names):
    """Class-attribute matrix from a CSV with header `class,<attr>,...`."""
    path = Path(path)
    by_class = {}
    with open(path, encoding="utf-8", newline="") as fp:
        reader = csv.reader(fp)
        header = next(reader, None)
        if not header or header[0] != "class":
            raise ValueError(f"{path.name}: first header column must be 'class'")
        width = len(header) - 1
        if width < 1:
            raise ValueError(f"{path.name}: no attribute columns")
        for row in reader:
            if len(row) != width + 1:
                raise ValueError(f"{path.name}: row for {row[0]!r} has {len(row) - 1} values, "
                                 f"expected {width}")
            by_class[row[0]] = [float(v) for v in row[1:]]
    rows = []
    for name in class_names:
        if name not in by_class:
            raise ValueError(f"{path.name}: missing class entry {name!r}")
        rows.append(by_class[name])
    return np.asarray(rows, dtype=np.float32)


def read_text_dir(path, class_names):
    """One description text per class from `<class>.txt` files."""
    path = Path(path)
    texts = []
    for name in class_names:
        fp = path / f"{name}.txt"
        if not fp.is_file():
            raise ValueError(f"missing class entry: no description file for {name!r}")
        text = fp.read_text(encoding="utf-8").strip()
        if not text:
            raise ValueError(f"empty description text for class {name!r}")
        texts.append(text)
    return texts


def embed_semantics(manifest):
    """Semantic matrix with one row per class, in class-name order."""
    if manifest.semantic_source == "attribute_csv":
        return read_attribute_csv(manifest.semantic_path, manifest.class_names)
    if manifest.semantic_source == "llm_text_dir":
        texts = read_text_dir(manifest.semantic_path, manifest.class_names)
        return embed_texts(texts, manifest.text_embedder_name)
    raise ValueError(f"unknown semantic source {manifest.semantic_source!r}")
