"""Cross-package contract test: a bundle produced by the ingestion CLI must
pass the training library's loader validation and run through its full
pipeline (no-refinement case) to finite metrics.

The ingestion package itself never imports the training library; this test
exercises the published interfaces (the bundle directory format, the
library loader, the pipeline CLI).
"""

import csv
import json
import math
import subprocess
import sys
import time

import pytest

from bundle_ingest.cli import main as ingest_main

FAST_PIPELINE_CONFIG = {
    "align_steps": 400,
    "refine_steps": 50,
    "gan_steps": 40,
    "n_critic": 2,
    "classifier_steps": 200,
    "per_class_count": 10,
    "batch_size": 16,
    "gan_batch": 16,
    "classifier_batch": 16,
}


@pytest.fixture(scope="module")
def ingested_bundle(miniature_dataset, attribute_csv, splits_json, tmp_path_factory):
    out = tmp_path_factory.mktemp("contract") / "bundle"
    rc = ingest_main([
        "--root", str(miniature_dataset),
        "--semantics", str(attribute_csv),
        "--splits", str(splits_json),
        "--out", str(out),
        "--backbone", "pixelstats",
    ])
    assert rc == 0
    return out


def test_loader_accepts_ingested_bundle(ingested_bundle):
    cdgzsl_data = pytest.importorskip("cdgzsl.data")
    bundle, manifest = cdgzsl_data.load_bundle(ingested_bundle)
    assert bundle.n_samples == 45
    assert bundle.d_feat == 96
    assert bundle.d_sem == 5
    assert manifest.seen_classes == (0, 1)
    assert manifest.unseen_classes == (2,)
    assert manifest.unseen_domain == 2


def test_criterion_9_pipeline_runs_to_finite_metrics(ingested_bundle, tmp_path):
    t0 = time.monotonic()
    cfg_path = tmp_path / "fast.json"
    cfg_path.write_text(json.dumps(FAST_PIPELINE_CONFIG), encoding="utf-8")
    runs = tmp_path / "runs"
    proc = subprocess.run(
        [sys.executable, "-m", "cdgzsl.cli", "--config", str(cfg_path),
         "run-all", "--bundle", str(ingested_bundle),
         "--ablation", "a", "--seeds", "0", "--out", str(runs)],
        capture_output=True, text=True, timeout=300,
    )
    assert proc.returncode == 0, proc.stderr
    with open(runs / "summary.csv") as fp:
        rows = list(csv.reader(fp))
    assert rows[0] == ["case", "seed", "S", "U", "H"]
    case, seed, s, u, h = rows[1]
    assert (case, seed) == ("a", "0")
    values = [float(s), float(u), float(h)]
    finite = all(math.isfinite(v) and 0.0 <= v <= 1.0 for v in values)
    elapsed = time.monotonic() - t0
    marker = "PASS" if finite else "FAIL"
    print(f"[{marker}] criterion 9: ingested miniature bundle validated and ran "
          f"case-a pipeline to S={values[0]:.3f} U={values[1]:.3f} H={values[2]:.3f} "
          f"({elapsed:.0f}s)")
    assert finite
