"""Compile image datasets and semantic sources into portable embedding bundles."""

from .backbones import extract_features, make_backbone
from .bundle_writer import write_bundle
from .manifest import IngestManifest, discover_domains
from .semantics import embed_semantics

__version__ = "0.1.0"

__all__ = [
    "IngestManifest",
    "discover_domains",
    "embed_semantics",
    "extract_features",
    "make_backbone",
    "write_bundle",
    "__version__",
]
