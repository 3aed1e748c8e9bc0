import csv
import json

import pytest

from cdgzsl.cli import main
from cdgzsl.config import ExperimentConfig
from cdgzsl.data import load_bundle


@pytest.fixture(scope="module")
def fast_cfg_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "fast.json"
    ExperimentConfig(
        align_steps=250, refine_steps=50, gan_steps=30, n_critic=2,
        classifier_steps=120, per_class_count=10, batch_size=32, gan_batch=32,
        classifier_batch=32,
    ).to_json(path)
    return str(path)


@pytest.fixture(scope="module")
def cli_bundle(tmp_path_factory):
    out = tmp_path_factory.mktemp("bundle") / "synth"
    rc = main([
        "--seed", "5", "synth", "--out", str(out),
        "--classes", "10", "--domains", "4", "--latent", "3", "--feat", "12",
        "--sem-intrinsic", "3", "--sem-noise", "4", "--samples", "8",
        "--unseen-fraction", "0.2",
    ])
    assert rc == 0
    return str(out)


def test_synth_bundle_valid(cli_bundle):
    bundle, manifest = load_bundle(cli_bundle)
    assert bundle.n_samples == 10 * 4 * 8
    assert manifest.unseen_domain == 3


def test_stage_pipeline(tmp_path, cli_bundle, fast_cfg_file):
    aligned = tmp_path / "aligned"
    rc = main(["--config", fast_cfg_file, "--seed", "1",
               "align", "--bundle", cli_bundle, "--out", str(aligned)])
    assert rc == 0
    assert (aligned / "encoder.ckpt").is_file()
    assert (aligned / "dark_knowledge.mtx1").is_file()

    refined = tmp_path / "refined"
    rc = main(["--config", fast_cfg_file, "--seed", "1",
               "refine", "--bundle", cli_bundle, "--aligned", str(aligned),
               "--out", str(refined)])
    assert rc == 0
    with open(refined / "trace.csv") as fp:
        rows = list(csv.reader(fp))
    assert rows[0] == ["step", "L_s", "L_meta", "L_total"]
    assert len(rows) == 1 + 50

    gan_dir = tmp_path / "gan"
    rc = main(["--config", fast_cfg_file, "--seed", "1",
               "generate", "--bundle", cli_bundle, "--aligned", str(aligned),
               "--refined", str(refined), "--out", str(gan_dir)])
    assert rc == 0
    assert (gan_dir / "fake_unseen.mtx1").is_file()
    assert (gan_dir / "Cc.ckpt").is_file()

    metrics_path = tmp_path / "metrics.json"
    rc = main(["--config", fast_cfg_file,
               "eval", "--bundle", cli_bundle, "--aligned", str(aligned),
               "--refined", str(refined), "--gan", str(gan_dir),
               "--out", str(metrics_path)])
    assert rc == 0
    doc = json.loads(metrics_path.read_text())
    assert set(doc) == {"S", "U", "H", "per_class_accuracy"}
    assert 0.0 <= doc["S"] <= 1.0
    assert 0.0 <= doc["U"] <= 1.0

    proj = tmp_path / "proj.csv"
    rc = main(["project", "--bundle", cli_bundle, "--refined", str(refined),
               "--out", str(proj)])
    assert rc == 0
    with open(proj) as fp:
        rows = list(csv.reader(fp))
    assert rows[0] == ["class", "space", "x", "y"]
    assert len(rows) == 1 + 2 * 10


def test_run_all_summary_and_determinism(tmp_path, cli_bundle, fast_cfg_file):
    out1 = tmp_path / "runs1"
    out2 = tmp_path / "runs2"
    args = ["--config", fast_cfg_file, "run-all", "--bundle", cli_bundle,
            "--ablation", "ad", "--seeds", "0,1"]
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    with open(out1 / "summary.csv") as fp:
        rows = list(csv.reader(fp))
    assert rows[0] == ["case", "seed", "S", "U", "H"]
    assert [r[0] for r in rows[1:]] == ["a", "a", "d", "d"]
    assert (out1 / "summary.csv").read_bytes() == (out2 / "summary.csv").read_bytes()


def test_error_paths_return_nonzero(tmp_path):
    rc = main(["align", "--bundle", str(tmp_path / "missing"), "--out", str(tmp_path / "o")])
    assert rc == 1


def test_config_roundtrip(tmp_path):
    cfg = ExperimentConfig(seed=42, gan_steps=7)
    path = tmp_path / "c.json"
    cfg.to_json(path)
    assert ExperimentConfig.from_json(path) == cfg
    doc = json.loads(path.read_text())
    doc["bogus"] = 1
    path.write_text(json.dumps(doc))
    with pytest.raises(ValueError, match="unknown config keys"):
        ExperimentConfig.from_json(path)
