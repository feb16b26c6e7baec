"""Prometheus metrics collector for SWFormer runs."""

import logging
from pathlib import Path
from typing import Mapping, Optional, Union

from prometheus_client import (
    CollectorRegistry,
    Counter,
    Gauge,
    Histogram,
    Info,
    generate_latest,
    write_to_textfile,
)

from swformer import __version__

logger = logging.getLogger(__name__)

# Create a custom registry for application metrics
registry = CollectorRegistry()

# Counter metrics (only increase)
train_steps_total = Counter(
    'swformer_train_steps_total',
    'Total number of optimizer steps taken',
    registry=registry
)

images_processed_total = Counter(
    'swformer_images_processed_total',
    'Total number of images processed',
    ['command'],
    registry=registry
)

# Histogram metrics (distribution of values)
train_step_seconds = Histogram(
    'swformer_train_step_seconds',
    'Wall time of one forward/backward/update step',
    buckets=[0.01, 0.05, 0.1, 0.25, 0.5, 1.0, 2.5, 5.0, 10.0, 30.0],
    registry=registry
)

# Gauge metrics (current value, can go up or down)
train_loss = Gauge(
    'swformer_train_loss',
    'Most recent training loss',
    ['term'],  # loss, spatial, wavelet, fourier
    registry=registry
)

learning_rate = Gauge(
    'swformer_learning_rate',
    'Learning rate used by the most recent step',
    registry=registry
)

eval_psnr_db = Gauge(
    'swformer_eval_psnr_db',
    'Mean PSNR of the most recent evaluation',
    registry=registry
)

eval_ssim = Gauge(
    'swformer_eval_ssim',
    'Mean SSIM of the most recent evaluation',
    registry=registry
)

# Info metric (key-value pairs)
build_info = Info(
    'swformer_build',
    'Build information',
    registry=registry
)

build_info.info({
    'version': __version__,
    'name': 'swformer',
})


class MetricsCollector:
    """Centralized metrics collector."""

    @staticmethod
    def record_train_step(
        duration_seconds: float,
        lr: float,
        terms: Mapping[str, float],
    ):
        """Record one optimizer step.

        Args:
            duration_seconds: Wall time of the step
            lr: Learning rate applied
            terms: Loss values keyed by term (loss, spatial, wavelet, fourier)
        """
        train_steps_total.inc()
        train_step_seconds.observe(duration_seconds)
        learning_rate.set(lr)
        for term, value in terms.items():
            train_loss.labels(term=term).set(value)

    @staticmethod
    def record_images(command: str, count: int = 1):
        """Count images handled by a command (eval, infer, analyze, make-corpus)."""
        images_processed_total.labels(command=command).inc(count)

    @staticmethod
    def update_eval(psnr_db: float, ssim: float):
        """Publish aggregate evaluation scores.

        Infinite PSNR is published as-is; Prometheus text format has ``+Inf``.
        """
        eval_psnr_db.set(psnr_db)
        eval_ssim.set(ssim)

    @staticmethod
    def generate_metrics() -> bytes:
        """Generate Prometheus metrics output.

        Returns:
            Bytes of Prometheus metrics in text format
        """
        return generate_latest(registry)

    @staticmethod
    def write_textfile(path: Union[str, Path]) -> None:
        """Write the registry in text exposition format (atomic rename)."""
        write_to_textfile(str(path), registry)
        logger.debug("Wrote metrics to %s", path)


# Global metrics collector instance
_metrics_collector: Optional[MetricsCollector] = None


def get_metrics_collector() -> MetricsCollector:
    """Get the global metrics collector instance.

    Returns:
        MetricsCollector instance
    """
    global _metrics_collector  # noqa: PLW0603
    if _metrics_collector is None:
        _metrics_collector = MetricsCollector()
    return _metrics_collector
