import json

import numpy as np
import pytest
from PIL import Image

DOMAINS = ["art", "clipart", "photo"]
CLASSES = ["chair", "lamp", "table"]
IMAGES_PER_CLASS = 5


def class_image(domain_id, class_id, index, size=48):
    """Deterministic procedural image: per-class spatial pattern shifted by a
    per-domain color cast plus mild per-image noise."""
    rng = np.random.default_rng(100_000 * domain_id + 1_000 * class_id + index)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) / size
    pattern = [
        np.sin(6 * np.pi * xx),             # chair: vertical stripes
        np.sin(6 * np.pi * (xx + yy)),      # lamp: diagonals
        np.sin(6 * np.pi * xx * yy),        # table: hyperbolic bands
    ][class_id]
    cast = np.array([[0.9, 0.4, 0.2], [0.3, 0.8, 0.5], [0.4, 0.4, 0.9]])[domain_id]
    base = (pattern[..., None] * 0.5 + 0.5) * cast
    noisy = np.clip(base + 0.05 * rng.standard_normal(base.shape), 0, 1)
    return Image.fromarray((noisy * 255).astype(np.uint8), "RGB")


@pytest.fixture(scope="session")
def miniature_dataset(tmp_path_factory):
    """2 seen + 1 unseen domain, 2 seen + 1 unseen class, 5 images per cell."""
    root = tmp_path_factory.mktemp("dataset")
    for d, domain in enumerate(DOMAINS):
        for c, cls in enumerate(CLASSES):
            folder = root / domain / cls
            folder.mkdir(parents=True)
            for i in range(IMAGES_PER_CLASS):
                class_image(d, c, i).save(folder / f"img_{i:02d}.png")
    return root


@pytest.fixture(scope="session")
def attribute_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("sem") / "attributes.csv"
    path.write_text(
        "class,has_legs,emits_light,flat_top,sittable,tall\n"
        "chair,1,0,0,1,0\n"
        "lamp,0,1,0,0,1\n"
        "table,1,0,1,0,0\n",
        encoding="utf-8",
    )
    return path


@pytest.fixture(scope="session")
def splits_json(tmp_path_factory):
    path = tmp_path_factory.mktemp("splits") / "splits.json"
    path.write_text(json.dumps({
        "seen_domains": ["art", "clipart"],
        "unseen_domain": "photo",
        "seen_classes": ["chair", "lamp"],
        "unseen_classes": ["table"],
        "val_classes": [],
    }), encoding="utf-8")
    return path
