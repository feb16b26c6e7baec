"""Unit tests for Prometheus metrics and error records."""

import math

import pytest

from swformer.errors import (
    CheckpointError,
    ConfigError,
    DimensionError,
    GradCheckFailed,
    IngestionError,
    InputNotFoundError,
    TrainingAborted,
    UsageError,
)
from swformer.metrics.collector import MetricsCollector, get_metrics_collector, registry


def _value(name, labels=None):
    return registry.get_sample_value(name, labels or {})


class TestMetricsCollector:
    """Test metric recording."""

    def test_singleton(self):
        """Test the global collector is shared."""
        assert get_metrics_collector() is get_metrics_collector()

    def test_record_train_step(self):
        """Test a step updates the counter, gauges and histogram."""
        before = _value("swformer_train_steps_total") or 0.0
        count_before = _value("swformer_train_step_seconds_count") or 0.0
        MetricsCollector.record_train_step(0.2, 5e-4, {"loss": 0.3, "fourier": 0.01})
        assert _value("swformer_train_steps_total") == before + 1
        assert _value("swformer_train_step_seconds_count") == count_before + 1
        assert _value("swformer_learning_rate") == pytest.approx(5e-4)
        assert _value("swformer_train_loss", {"term": "fourier"}) == pytest.approx(0.01)

    def test_record_images(self):
        """Test images are counted per command."""
        before = _value("swformer_images_processed_total", {"command": "infer"}) or 0.0
        MetricsCollector.record_images("infer", 3)
        assert _value("swformer_images_processed_total", {"command": "infer"}) == before + 3

    def test_infinite_psnr(self):
        """Test an infinite PSNR is exported as +Inf."""
        MetricsCollector.update_eval(math.inf, 1.0)
        assert _value("swformer_eval_psnr_db") == math.inf
        assert b"swformer_eval_psnr_db +Inf" in MetricsCollector.generate_metrics()

    def test_write_textfile(self, temp_dir):
        """Test the registry is written in text exposition format."""
        path = temp_dir / "metrics.prom"
        MetricsCollector.write_textfile(path)
        text = path.read_text()
        assert "swformer_build_info" in text
        assert "swformer_train_steps_total" in text


class TestErrorRecords:
    """Test exit codes and machine-readable records."""

    @pytest.mark.parametrize(
        "error,code,kind",
        [
            (ConfigError("bad"), 2, "config"),
            (InputNotFoundError("/no/such", "image"), 3, "input_not_found"),
            (IngestionError("unmatched", ["b", "a"]), 3, "ingestion"),
            (TrainingAborted("nan", step=3, parameter="w"), 4, "training_aborted"),
            (DimensionError("shape"), 5, "dimension"),
            (UsageError("misuse"), 5, "usage"),
            (GradCheckFailed("drift"), 6, "gradcheck_failed"),
            (CheckpointError("x.swf", "corrupt"), 7, "checkpoint"),
        ],
    )
    def test_to_record(self, error, code, kind):
        """Test each error kind maps to its exit code."""
        record = error.to_record()
        assert record == {"error": kind, "exit_code": code, "message": str(error)}

    def test_orphans_sorted_in_message(self):
        """Test ingestion errors list orphans in sorted order."""
        error = IngestionError("Unmatched images", ["clean/b", "clean/a"])
        assert error.orphans == ["clean/a", "clean/b"]
        assert str(error) == "Unmatched images: clean/a, clean/b"

    def test_builtin_compatibility(self):
        """Test errors remain catchable as their builtin counterparts."""
        assert isinstance(InputNotFoundError("x"), FileNotFoundError)
        assert isinstance(DimensionError("x"), ValueError)
