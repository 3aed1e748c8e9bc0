"""Cross-domain generalized zero-shot learning on precomputed embeddings."""

from .config import ExperimentConfig, make_rng, stage_rngs
from .data import (
    BundleError,
    DatasetBundle,
    SplitManifest,
    SyntheticSpec,
    generate_synthetic,
    load_bundle,
    save_bundle,
    evaluation_rows,
    training_rows,
)
from .evaluate import AblationCase, GzslMetrics, compute_metrics, predict, run_experiment

__version__ = "0.1.0"

__all__ = [
    "AblationCase",
    "BundleError",
    "DatasetBundle",
    "ExperimentConfig",
    "GzslMetrics",
    "SplitManifest",
    "SyntheticSpec",
    "compute_metrics",
    "generate_synthetic",
    "load_bundle",
    "make_rng",
    "predict",
    "run_experiment",
    "save_bundle",
    "stage_rngs",
    "evaluation_rows",
    "training_rows",
    "__version__",
]
