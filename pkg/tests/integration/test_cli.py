"""Command-line workflows: make-corpus, train, eval, infer, analyze, gradcheck."""

import json
import math

import numpy as np
import pytest
import yaml
from PIL import Image

from swformer.cli.main import main
from swformer.config.settings import reload_settings
from swformer.objective.metrics import MetricReport
from swformer.train.checkpoint import load_checkpoint
from swformer.train.trainer import TrainingLog

TINY = ["--set", "model.base_width=8", "--set", "model.blocks_per_stage=1,1,1,1,1"]

TRAIN_YAML = """
model:
  base_width: 8
  blocks_per_stage: [1, 1, 1, 1, 1]
train:
  steps: 2
  batch_size: 1
  patch_size: 16
data:
  n_images: 2
  image_size: 16
"""


@pytest.fixture
def corpus(temp_dir):
    out = temp_dir / "gen"
    code = main(["make-corpus", "--out", str(out), "--set", "data.n_images=2", "--set", "data.image_size=16"])
    assert code == 0
    return out / "corpus"


def _last_json_line(text):
    return json.loads(text.strip().splitlines()[-1])


@pytest.mark.integration
def test_make_corpus_writes_pairs(corpus):
    """Test two degraded/clean pairs, a manifest and the run files are written."""
    assert len(list((corpus / "degraded").glob("*.png"))) == 2
    assert len(list((corpus / "clean").glob("*.png"))) == 2
    assert yaml.safe_load((corpus / "manifest.yaml").read_text())["count"] == 2
    run_dir = corpus.parent
    for name in ("config.yaml", "manifest.yaml", "metrics.prom"):
        assert (run_dir / name).exists()


@pytest.mark.integration
def test_metrics_file_can_be_disabled(temp_dir, monkeypatch):
    """Test SWFORMER_METRICS_ENABLED=false skips metrics.prom."""
    monkeypatch.setenv("SWFORMER_METRICS_ENABLED", "false")
    reload_settings()
    out = temp_dir / "quiet"
    assert main(["make-corpus", "--out", str(out), "--set", "data.n_images=1", "--set", "data.image_size=16"]) == 0
    assert (out / "manifest.yaml").exists()
    assert not (out / "metrics.prom").exists()


@pytest.mark.integration
def test_train_then_resume(temp_dir):
    """Test training writes a checkpoint and log, and a resumed run continues from it."""
    config_path = temp_dir / "train.yaml"
    config_path.write_text(TRAIN_YAML)
    out = temp_dir / "run"
    assert main(["train", "--config", str(config_path), "--out", str(out), "--seed", "3"]) == 0

    assert load_checkpoint(out / "last.swf").step == 2
    assert len(TrainingLog.read(out / "train_log.jsonl")) == 2
    echoed = yaml.safe_load((out / "config.yaml").read_text())
    assert echoed["train"]["seed"] == 3
    assert echoed["model"]["init_seed"] == 3
    manifest = yaml.safe_load((out / "manifest.yaml").read_text())
    assert manifest["command"] == "train"
    assert len(manifest["config_sha256"]) == 64
    summary = yaml.safe_load((out / "train_summary.yaml").read_text())
    assert summary["steps_completed"] == 2

    resumed = temp_dir / "resumed"
    code = main([
        "train", "--config", str(config_path), "--out", str(resumed), "--seed", "3",
        "--set", "train.steps=3", "--set", f"train.resume_from={out / 'last.swf'}",
    ])
    assert code == 0
    assert load_checkpoint(resumed / "last.swf").step == 3
    assert [r.step for r in TrainingLog.read(resumed / "train_log.jsonl").records] == [2]


@pytest.mark.integration
def test_train_twice_into_same_directory(temp_dir):
    """Test repeating a run into one directory reproduces the log and checkpoint bytes."""
    config_path = temp_dir / "train.yaml"
    config_path.write_text(TRAIN_YAML)
    out = temp_dir / "run"
    args = ["train", "--config", str(config_path), "--out", str(out), "--seed", "3"]

    assert main(args) == 0
    first_log = (out / "train_log.jsonl").read_bytes()
    first_checkpoint = (out / "last.swf").read_bytes()
    assert main(args) == 0

    assert (out / "train_log.jsonl").read_bytes() == first_log
    assert (out / "last.swf").read_bytes() == first_checkpoint
    assert [r.step for r in TrainingLog.read(out / "train_log.jsonl").records] == [0, 1]


@pytest.mark.integration
def test_eval_identical_folders(corpus, temp_dir):
    """Test scoring a folder against itself gives infinite PSNR and SSIM 1."""
    out = temp_dir / "eval"
    code = main([
        "eval", "--out", str(out),
        "--set", f"eval.restored_dir={corpus / 'clean'}",
        "--set", f"eval.reference_dir={corpus / 'clean'}",
    ])
    assert code == 0
    report = MetricReport.read_jsonl(out / "metrics.jsonl")
    assert len(report.images) == 2
    assert report.psnr_db == math.inf
    assert report.ssim == pytest.approx(1.0)
    assert "Infinity" in (out / "metrics.jsonl").read_text()


@pytest.mark.integration
def test_eval_restores_with_network(corpus, temp_dir):
    """Test evaluation restores degraded images first when no restored folder is given."""
    out = temp_dir / "eval_net"
    code = main([
        "eval", "--out", str(out), *TINY, "--variant", "m",
        "--set", f"eval.degraded_dir={corpus / 'degraded'}",
        "--set", f"eval.reference_dir={corpus / 'clean'}",
        "--set", "eval.y_channel=true",
    ])
    assert code == 0
    report = MetricReport.read_jsonl(out / "metrics.jsonl")
    assert report.y_channel
    assert all(np.isfinite(m.psnr_db) for m in report.images)


@pytest.mark.integration
def test_infer_identity_heads(corpus, temp_dir):
    """Test zero-initialised heads reproduce the inputs at every exit."""
    out = temp_dir / "infer"
    code = main([
        "infer", "--out", str(out), *TINY,
        "--set", "model.zero_init_heads=true",
        "--set", f"infer.input_dir={corpus / 'degraded'}",
    ])
    assert code == 0
    for source in sorted((corpus / "degraded").glob("*.png")):
        original = np.asarray(Image.open(source))
        np.testing.assert_array_equal(np.asarray(Image.open(out / "large" / source.name)), original)
        for exit_name in ("small", "medium"):
            restored = np.asarray(Image.open(out / exit_name / source.name)).astype(int)
            assert np.max(np.abs(restored - original)) <= 1


@pytest.mark.integration
def test_analyze_pairs(corpus, temp_dir):
    """Test each pair gets panels, an energy table and swapped images."""
    out = temp_dir / "analysis"
    code = main([
        "analyze", "--out", str(out),
        "--set", f"analysis.clean_dir={corpus / 'clean'}",
        "--set", f"analysis.degraded_dir={corpus / 'degraded'}",
        "--set", "analysis.swap_bands=LL,HH",
    ])
    assert code == 0
    stems = sorted(p.stem for p in (corpus / "clean").glob("*.png"))
    for stem in stems:
        pair_dir = out / stem
        table = yaml.safe_load((pair_dir / "energy.yaml").read_text())
        fractions = [band["fraction"] for band in table["bands"].values()]
        assert sum(fractions) == pytest.approx(1.0)
        assert (pair_dir / "swap_clean.png").exists()
        assert (pair_dir / "swap_degraded.png").exists()


@pytest.mark.integration
@pytest.mark.slow
def test_gradcheck_tiny_network(temp_dir):
    """Test every block of the tiny network passes the finite-difference check on a 1x3x16x16 input."""
    out = temp_dir / "gradcheck"
    code = main([
        "gradcheck", "--out", str(out), *TINY,
        "--set", "gradcheck.image_size=16", "--set", "gradcheck.max_elements=4",
    ])
    assert code == 0
    table = yaml.safe_load((out / "gradcheck.yaml").read_text())
    assert "stage1" in table and "head5" in table
    assert all(entry["passed"] for entry in table.values())


@pytest.mark.integration
def test_unknown_config_key_exits_2(temp_dir, capsys):
    """Test a bad override exits with code 2 and one JSON error line on stderr."""
    code = main(["train", "--out", str(temp_dir / "bad"), "--set", "model.depth=3"])
    assert code == 2
    record = _last_json_line(capsys.readouterr().err)
    assert record["error"] == "config"
    assert record["exit_code"] == 2
    assert "model.depth" in record["message"]


@pytest.mark.integration
def test_bad_variant_exits_2(temp_dir, capsys):
    """Test an unknown --variant is a configuration error."""
    assert main(["infer", "--out", str(temp_dir / "v"), "--variant", "xl"]) == 2
    assert _last_json_line(capsys.readouterr().err)["error"] == "config"


@pytest.mark.integration
def test_missing_input_exits_3(temp_dir, capsys):
    """Test a missing input folder exits with code 3."""
    code = main(["infer", "--out", str(temp_dir / "m"), "--set", f"infer.input_dir={temp_dir / 'absent'}"])
    assert code == 3
    assert _last_json_line(capsys.readouterr().err)["error"] == "input_not_found"


@pytest.mark.integration
def test_corrupt_checkpoint_exits_7(corpus, temp_dir, capsys):
    """Test an unreadable checkpoint exits with code 7."""
    bogus = temp_dir / "bogus.swf"
    bogus.write_bytes(b"not a checkpoint at all")
    code = main([
        "infer", "--out", str(temp_dir / "c"),
        "--set", f"infer.input_dir={corpus / 'degraded'}",
        "--set", f"infer.checkpoint={bogus}",
    ])
    assert code == 7
    assert _last_json_line(capsys.readouterr().err)["error"] == "checkpoint"
