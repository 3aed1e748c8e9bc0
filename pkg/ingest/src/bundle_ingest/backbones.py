"""Frozen image backbones producing one feature vector per image.

`pixelstats` is a dependency-free reference backbone (block color
statistics) used for offline runs and golden-checksum tests. The ResNet-50
variants use torchvision when it is installed: `resnet50` with pretrained
weights (needs the weight download or a local cache), `resnet50-untrained`
with a seeded deterministic initialization, frozen, for environments without
weight access.
"""

import logging

import numpy as np
from PIL import Image

log = logging.getLogger(__name__)

PIXELSTATS_GRID = 4
PIXELSTATS_SIZE = 32


def pixelstats_features(image):
    """Per-block channel means and standard deviations on a 4x4 grid of a
    32x32 resize: 4*4*3*2 = 96 dimensions."""
    img = image.convert("RGB").resize((PIXELSTATS_SIZE, PIXELSTATS_SIZE), Image.BILINEAR)
    arr = np.asarray(img, dtype=np.float64) / 255.0
    block = PIXELSTATS_SIZE // PIXELSTATS_GRID
    feats = []
    for by in range(PIXELSTATS_GRID):
        for bx in range(PIXELSTATS_GRID):
            patch = arr[by * block : (by + 1) * block, bx * block : (bx + 1) * block]
            feats.extend(patch.mean(axis=(0, 1)))
            feats.extend(patch.std(axis=(0, 1)))
    return np.asarray(feats, dtype=np.float32)


class PixelStatsBackbone:
    name = "pixelstats"
    d_feat = PIXELSTATS_GRID * PIXELSTATS_GRID * 3 * 2

    def __call__(self, image):
        return pixelstats_features(image)


class ResNet50Backbone:
    """Penultimate-layer (global average pool) features of ResNet-50."""

    d_feat = 2048

    def __init__(self, pretrained=True):
        import torch
        import torchvision

        self._torch = torch
        if pretrained:
            weights = torchvision.models.ResNet50_Weights.IMAGENET1K_V2
            model = torchvision.models.resnet50(weights=weights)
        else:
            torch.manual_seed(0)  # frozen, deterministic stand-in weights
            model = torchvision.models.resnet50(weights=None)
        model.fc = torch.nn.Identity()
        model.eval()
        self.model = model
        from torchvision import transforms

        self.preprocess = transforms.Compose([
            transforms.Resize(256),
            transforms.CenterCrop(224),
            transforms.ToTensor(),
            transforms.Normalize(mean=[0.485, 0.456, 0.406], std=[0.229, 0.224, 0.225]),
        ])

    def __call__(self, image):
        tensor = self.preprocess(image.convert("RGB")).unsqueeze(0)
        with self._torch.no_grad():
            out = self.model(tensor)
        return out.squeeze(0).numpy().astype(np.float32)


def make_backbone(name):
    if name == "pixelstats":
        return PixelStatsBackbone()
    if name == "resnet50":
        return ResNet50Backbone(pretrained=True)
    if name == "resnet50-untrained":
        return ResNet50Backbone(pretrained=False)
    raise ValueError(f"unknown backbone {name!r} "
                     "(expected pixelstats, resnet50, resnet50-untrained)")


def extract_features(manifest, backbone=None):
    """Embed every readable image; returns (features, class_ids, domain_ids).

    Rows follow the deterministic (domain, class, filename) iteration order;
    unreadable images are skipped with a warning and a final skipped count.
    """
    from .manifest import iter_images

    backbone = backbone or make_backbone(manifest.backbone_name)
    rows, class_ids, domain_ids = [], [], []
    skipped = 0
    for domain_id, class_id, path in iter_images(manifest):
        try:
            with Image.open(path) as img:
                rows.append(backbone(img))
        except OSError as exc:
            skipped += 1
            log.warning("skipping unreadable image %s (%s)", path, exc)
            continue
        class_ids.append(class_id)
        domain_ids.append(domain_id)
    if skipped:
        log.warning("skipped %d unreadable images", skipped)
    if not rows:
        raise ValueError("no readable images found under the dataset root")
    return (
        np.stack(rows).astype(np.float32),
        np.asarray(class_ids, dtype=np.int64),
        np.asarray(domain_ids, dtype=np.int64),
    )
