"""Implementations of the ``swformer`` subcommands.

Each ``cmd_*`` takes a :class:`RunConfig`, writes its outputs under
``run.out_dir`` together with ``config.yaml``, ``manifest.yaml`` and
``metrics.prom``, and raises :class:`swformer.errors.SWFormerError` on
failure.
"""

import logging
import platform
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import PIL
import scipy
import yaml

from swformer import __version__
from swformer.analysis.spectral import SpectralReport, analyze_pair, swap_subbands, write_report
from swformer.config.settings import get_settings
from swformer.config.yaml_config import EXIT_LEVELS, SWFormerConfig, load_config, normalize_variant
from swformer.data.corpus import corpus_from_config, load_paired_folder, make_corpus, write_corpus
from swformer.data.io import read_png, write_png
from swformer.errors import ConfigError, GradCheckFailed, InputNotFoundError
from swformer.metrics.collector import get_metrics_collector
from swformer.model.network import SWFormerNet
from swformer.objective.metrics import MetricReport, evaluate_pairs
from swformer.tensor import ops
from swformer.tensor.core import Tensor, precision
from swformer.tensor.gradcheck import GradCheckReport, grad_check
from swformer.train.checkpoint import load_checkpoint, restore_model
from swformer.train.trainer import Trainer, training_psnr
from swformer.workers.pool import map_ordered

logger = logging.getLogger(__name__)

COMMANDS = ("train", "eval", "infer", "analyze", "gradcheck", "make-corpus")


@dataclass
class RunConfig:
    """One command-line invocation."""
    command: str
    config_path: Optional[Path] = None
    overrides: Dict[str, str] = field(default_factory=dict)
    out_dir: Path = Path("runs/latest")
    seed: Optional[int] = None
    variant: Optional[str] = None
    workers: int = 1

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"Unknown command {self.command!r}; choose from {', '.join(COMMANDS)}")
        self.out_dir = Path(self.out_dir)
        if self.variant is not None:
            try:
                self.variant = normalize_variant(self.variant)
            except ValueError as e:
                raise ConfigError(str(e)) from e
        if self.workers < 1:
            raise ConfigError(f"--workers must be >= 1, got {self.workers}")

    def effective_config(self) -> SWFormerConfig:
        """File, then ``--set`` overrides, then ``--seed`` on every seeded section."""
        overrides = dict(self.overrides)
        if self.seed is not None:
            for key in ("train.seed", "data.seed", "model.init_seed"):
                overrides.setdefault(key, str(self.seed))
        return load_config(self.config_path, overrides)


def _versions() -> Dict[str, str]:
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pillow": PIL.__version__,
        "swformer": __version__,
    }


def prepare_run(run: RunConfig) -> SWFormerConfig:
    """Resolve the config and echo it, with a manifest, into the output directory."""
    config = run.effective_config()
    run.out_dir.mkdir(parents=True, exist_ok=True)
    config.to_yaml(run.out_dir / "config.yaml")
    manifest = {
        "command": run.command,
        "config_sha256": config.sha256(),
        "seed": config.train.seed,
        "variant": run.variant,
        "workers": run.workers,
        "overrides": dict(run.overrides),
        "versions": _versions(),
        "created_at": datetime.now(timezone.utc).isoformat(),
    }
    with open(run.out_dir / "manifest.yaml", "w", encoding="utf-8") as f:
        yaml.safe_dump(manifest, f, default_flow_style=False, sort_keys=False)
    logger.info("Running %s into %s (config %s)", run.command, run.out_dir, manifest["config_sha256"][:12])
    return config


def finish_run(run: RunConfig) -> None:
    if get_settings().metrics_enabled:
        get_metrics_collector().write_textfile(run.out_dir / "metrics.prom")


def _require_dir(value: Optional[str], key: str) -> Path:
    if not value:
        raise ConfigError(f"{key} must be set for this command")
    path = Path(value)
    if not path.is_dir():
        raise InputNotFoundError(path, key)
    return path


def _network(config: SWFormerConfig, checkpoint: Optional[str]) -> SWFormerNet:
    if checkpoint:
        return restore_model(checkpoint)
    logger.warning("No checkpoint given; using freshly initialised weights (model.init_seed=%d)",
                   config.model.init_seed)
    return SWFormerNet(config.model).eval()


def cmd_train(run: RunConfig) -> int:
    config = prepare_run(run)
    try:
        pairs = corpus_from_config(config.data, run.workers)
        net = SWFormerNet(config.model)
        trainer = Trainer.from_config(
            net, pairs, config,
            log_path=run.out_dir / "train_log.jsonl",
            checkpoint_dir=run.out_dir,
            variant=run.variant,
        )
        if config.train.resume_from:
            trainer.resume(load_checkpoint(config.train.resume_from))
        trainer.run()
        summary = {**trainer.get_stats(), "training_psnr_db": training_psnr(net, pairs, run.variant)}
        with open(run.out_dir / "train_summary.yaml", "w", encoding="utf-8") as f:
            yaml.safe_dump(summary, f, default_flow_style=False, sort_keys=True)
        logger.info("Training PSNR %.3f dB", summary["training_psnr_db"])
    finally:
        finish_run(run)
    return 0


def _deepest(restored: Dict[str, Tensor]) -> Tensor:
    return restored[min(restored, key=EXIT_LEVELS.get)]


def cmd_eval(run: RunConfig) -> MetricReport:
    """Score restored images against references.

    With ``eval.restored_dir`` the images are read as they are; otherwise
    ``eval.degraded_dir`` is restored with the network first.
    """
    config = prepare_run(run)
    try:
        cfg = config.eval
        reference_dir = _require_dir(cfg.reference_dir, "eval.reference_dir")
        if cfg.restored_dir:
            pairs = load_paired_folder(_require_dir(cfg.restored_dir, "eval.restored_dir"), reference_dir, run.workers)
            restored = [p.degraded.data for p in pairs]
        else:
            pairs = load_paired_folder(_require_dir(cfg.degraded_dir, "eval.degraded_dir"), reference_dir, run.workers)
            net = _network(config, cfg.checkpoint)
            restored = [_deepest(net.restore(Tensor(p.degraded.data[None]), run.variant)).data[0] for p in pairs]
        report = evaluate_pairs(
            restored, [p.clean.data for p in pairs], [p.id for p in pairs], cfg.y_channel, run.workers
        )
        report.write_jsonl(run.out_dir / cfg.report_name)
        metrics = get_metrics_collector()
        metrics.update_eval(report.psnr_db, report.ssim)
        metrics.record_images("eval", len(pairs))
    finally:
        finish_run(run)
    return report


def cmd_infer(run: RunConfig) -> List[Path]:
    """Restore every PNG in ``infer.input_dir``; one output folder per exit."""
    config = prepare_run(run)
    try:
        input_dir = _require_dir(config.infer.input_dir, "infer.input_dir")
        net = _network(config, config.infer.checkpoint)
        sources = sorted(input_dir.glob("*.png"))
        if not sources:
            raise InputNotFoundError(input_dir / "*.png", "input images")

        def restore_one(source: Path) -> List[Path]:
            image = Tensor(read_png(source)[None])
            outputs = net.restore(image, run.variant)
            return [write_png(run.out_dir / name / f"{source.stem}.png", restored) for name, restored in outputs.items()]

        written = [path for paths in map_ordered(restore_one, sources, run.workers) for path in paths]
        get_metrics_collector().record_images("infer", len(sources))
        logger.info("Restored %d images into %d files", len(sources), len(written))
    finally:
        finish_run(run)
    return written


def cmd_analyze(run: RunConfig) -> List[SpectralReport]:
    """Per pair: spectral report panels, energy table and the band-swapped images."""
    config = prepare_run(run)
    try:
        cfg = config.analysis
        pairs = load_paired_folder(
            _require_dir(cfg.degraded_dir, "analysis.degraded_dir"),
            _require_dir(cfg.clean_dir, "analysis.clean_dir"),
            run.workers,
        )

        def analyze_one(pair) -> SpectralReport:
            target = run.out_dir / pair.id
            report = analyze_pair(pair.clean.data, pair.degraded.data)
            write_report(report, target)
            swapped_clean, swapped_degraded = swap_subbands(pair.clean.data, pair.degraded.data, cfg.swap_bands)
            write_png(target / "swap_clean.png", swapped_clean)
            write_png(target / "swap_degraded.png", swapped_degraded)
            return report

        reports = map_ordered(analyze_one, pairs, run.workers)
        get_metrics_collector().record_images("analyze", len(pairs))
    finally:
        finish_run(run)
    return reports


def _gradcheck_groups(net: SWFormerNet) -> Dict[str, Dict[str, Tensor]]:
    """Parameters grouped by top-level block (encode1, stage1, down1, ...)."""
    groups: Dict[str, Dict[str, Tensor]] = {}
    for name, param in net.named_parameters():
        groups.setdefault(name.split(".")[0], {})[name] = param
    return groups


def cmd_gradcheck(run: RunConfig) -> Dict[str, GradCheckReport]:
    """Finite-difference check of every block of the configured network in float64."""
    config = prepare_run(run)
    cfg = config.gradcheck
    results: Dict[str, GradCheckReport] = {}
    try:
        with precision("float64"):
            net = SWFormerNet(config.model)
            rng = np.random.default_rng(config.train.seed)
            size = cfg.image_size
            image = Tensor(rng.uniform(0.0, 1.0, size=(1, config.model.in_channels, size, size)))
            result = net.forward(image, run.variant)
            weights = {level: Tensor(rng.standard_normal(out.shape)) for level, out in result.outputs.items()}

            def objective() -> Tensor:
                outputs = net.forward(image, run.variant).outputs
                total = None
                for level in sorted(outputs):
                    term = ops.reduce_mean(ops.mul(outputs[level], weights[level]))
                    total = term if total is None else ops.add(total, term)
                return total

            for block, params in _gradcheck_groups(net).items():
                results[block] = grad_check(objective, params, cfg.tol, cfg.step, cfg.max_elements, config.train.seed)
                logger.info("%s: %s", block, results[block].summary())

        table = {
            block: {"passed": report.passed, "max_rel_error": report.max_rel_error}
            for block, report in results.items()
        }
        with open(run.out_dir / "gradcheck.yaml", "w", encoding="utf-8") as f:
            yaml.safe_dump(table, f, default_flow_style=False, sort_keys=False)
    finally:
        finish_run(run)

    failed = [block for block, report in results.items() if not report.passed]
    if failed:
        raise GradCheckFailed(f"gradient check failed for {', '.join(failed)}")
    return results


def cmd_make_corpus(run: RunConfig) -> Path:
    """Synthesise ``data.n_images`` pairs into ``<out>/corpus``."""
    config = prepare_run(run)
    try:
        data = config.data
        pairs = make_corpus(data.n_images, data.image_size, data.degradations, data.seed, run.workers)
        root = write_corpus(pairs, run.out_dir / "corpus", run.workers)
        get_metrics_collector().record_images("make-corpus", len(pairs))
    finally:
        finish_run(run)
    return root


HANDLERS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "infer": cmd_infer,
    "analyze": cmd_analyze,
    "gradcheck": cmd_gradcheck,
    "make-corpus": cmd_make_corpus,
}
