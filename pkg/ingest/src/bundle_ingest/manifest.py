"""Ingestion manifest: where the raw dataset lives and how to embed it.

Expected dataset layout: one folder per domain under the root, one folder
per class inside each domain, image files inside the class folders. The
class list is the union of class folder names across domains, sorted; domain
ids follow the order of `domain_folder_names`.
"""

from dataclasses import dataclass, field
from pathlib import Path

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg", ".bmp", ".gif", ".webp"}


@dataclass
class IngestManifest:
    dataset_root: Path
    domain_folder_names: list
    backbone_name: str = "resnet50"
    text_embedder_name: str = "hashing-64"
    semantic_source: str = "attribute_csv"  # or "llm_text_dir"
    semantic_path: Path = None
    class_names: list = field(default_factory=list)  # filled by validate()

    def validate(self):
        root = Path(self.dataset_root)
        if not root.is_dir():
            raise ValueError(f"dataset root {root} does not exist")
        if not self.domain_folder_names:
            raise ValueError("at least one domain folder is required")
        classes = set()
        for name in self.domain_folder_names:
            folder = root / name
            if not folder.is_dir():
                raise ValueError(f"missing domain folder {folder}")
            class_dirs = [p.name for p in folder.iterdir() if p.is_dir()]
            if not class_dirs:
                raise ValueError(f"domain folder {folder} has no class folders")
            classes.update(class_dirs)
        self.class_names = sorted(classes)
        return self


def discover_domains(root):
    """Sorted domain folder names under a dataset root."""
    root = Path(root)
    return sorted(p.name for p in root.iterdir() if p.is_dir())


def iter_images(manifest):
    """Yield (domain_id, class_id, path) in deterministic (domain, class,
    filename) order; class folders absent from a domain are skipped."""
    root = Path(manifest.dataset_root)
    class_index = {name: i for i, name in enumerate(manifest.class_names)}
    for domain_id, domain in enumerate(manifest.domain_folder_names):
        for class_name in manifest.class_names:
            folder = root / domain / class_name
            if not folder.is_dir():
                continue
            for path in sorted(folder.iterdir()):
                if path.suffix.lower() in IMAGE_EXTENSIONS:
                    yield domain_id, class_index[class_name], path
