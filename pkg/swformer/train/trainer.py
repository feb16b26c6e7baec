"""Training loop.

One :class:`Trainer` owns the network and its optimizer. Each step draws the
batch fixed by (seed, step), supervises every exit the variant produces
against the matching level of the clean pyramid, and applies one AdamW
update at the cosine learning rate for that step. A run resumed from a
checkpoint therefore follows the same trajectory as an uninterrupted one.
"""

import json
import logging
import math
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from swformer.config.yaml_config import EXIT_LEVELS, LossConfig, OptimConfig, Schedule, SWFormerConfig, TrainConfig
from swformer.data.corpus import PatchSampler
from swformer.data.synth import PairedSample
from swformer.errors import TrainingAborted
from swformer.metrics.collector import get_metrics_collector
from swformer.model.network import SWFormerNet, decompose_input
from swformer.objective.loss import LossTerms, MultiDomainLoss
from swformer.objective.metrics import psnr
from swformer.tensor.core import Tensor, backward
from swformer.train.checkpoint import Checkpoint, save_checkpoint
from swformer.train.optim import AdamW, clip_grad_norm, cosine_lr

logger = logging.getLogger(__name__)

CHECKPOINT_NAME = "last.swf"


@dataclass
class StepRecord:
    """One line of the training log."""
    step: int
    lr: float
    loss: float
    spatial: float
    wavelet: float
    fourier: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass
class TrainingLog:
    """Per-step records, mirrored to a JSON-lines file when ``path`` is set."""
    records: List[StepRecord] = field(default_factory=list)
    path: Optional[Path] = None

    def rewind(self, step: int) -> None:
        """Drop records at or after ``step``, in memory and in the file.

        A run starting at ``step`` rewrites whatever an earlier run left
        beyond that point, so repeating a run reproduces the file.
        """
        self.records = [r for r in self.records if r.step < step]
        if self.path is None:
            return
        kept: List[StepRecord] = []
        if self.path.exists():
            previous = self.read(self.path).records
            kept = [r for r in previous if r.step < step]
            dropped = len(previous) - len(kept)
            if dropped:
                logger.info("Discarding %d log records from step %d on in %s", dropped, step, self.path)
        tmp_path = self.path.with_name(self.path.name + ".tmp")
        with open(tmp_path, "w", encoding="utf-8") as f:
            f.writelines(r.to_json() + "\n" for r in kept)
        os.replace(tmp_path, self.path)

    def append(self, record: StepRecord) -> None:
        self.records.append(record)
        if self.path is not None:
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(record.to_json() + "\n")

    def __len__(self) -> int:
        return len(self.records)

    @property
    def losses(self) -> List[float]:
        return [r.loss for r in self.records]

    def window_means(self, window: int) -> List[float]:
        """Mean loss over consecutive non-overlapping windows."""
        losses = self.losses
        return [float(np.mean(losses[i:i + window])) for i in range(0, len(losses) - window + 1, window)]

    @classmethod
    def read(cls, path: Union[str, Path]) -> "TrainingLog":
        log = cls()
        with open(path, "r", encoding="utf-8") as f:
            for line in f:
                if line.strip():
                    log.records.append(StepRecord(**json.loads(line)))
        return log


class Trainer:
    """Trains one network on a fixed set of pairs."""

    def __init__(
        self,
        net: SWFormerNet,
        pairs: Sequence[PairedSample],
        loss: Optional[LossConfig] = None,
        optim: Optional[OptimConfig] = None,
        schedule: Optional[Schedule] = None,
        train: Optional[TrainConfig] = None,
        log_path: Optional[Union[str, Path]] = None,
        checkpoint_dir: Optional[Union[str, Path]] = None,
        variant: Optional[str] = None,
    ):
        self.net = net
        self.train_config = train or TrainConfig()
        schedule = schedule or Schedule()
        if schedule.total_steps is None:
            schedule = schedule.model_copy(update={"total_steps": self.train_config.steps})
        self.schedule = schedule
        self.loss = MultiDomainLoss(loss)
        self.optimizer = AdamW(dict(net.named_parameters()), optim)
        self.sampler = PatchSampler(
            pairs, self.train_config.patch_size, self.train_config.batch_size, self.train_config.seed
        )
        self.variant = variant
        self.log = TrainingLog(path=Path(log_path) if log_path else None)
        self.checkpoint_dir = Path(checkpoint_dir) if checkpoint_dir else None
        self.step = 0
        self.metrics = get_metrics_collector()

        self.stats = {
            "steps_completed": 0,
            "checkpoints_written": 0,
            "last_loss": None,
            "last_lr": None,
            "seconds": 0.0,
        }

    @classmethod
    def from_config(
        cls,
        net: SWFormerNet,
        pairs: Sequence[PairedSample],
        config: SWFormerConfig,
        log_path: Optional[Union[str, Path]] = None,
        checkpoint_dir: Optional[Union[str, Path]] = None,
        variant: Optional[str] = None,
    ) -> "Trainer":
        return cls(
            net, pairs, config.loss, config.optim, config.resolved_schedule(), config.train,
            log_path=log_path, checkpoint_dir=checkpoint_dir, variant=variant,
        )

    def resume(self, checkpoint: Checkpoint) -> None:
        """Continue from a checkpoint's weights, optimizer moments and step."""
        self.net.load_state_dict(checkpoint.arrays)
        if checkpoint.optim is not None:
            self.optimizer.state = checkpoint.optim
        self.step = checkpoint.step
        logger.info("Resuming training at step %d", self.step)

    def compute_loss(self, degraded: Tensor, clean: Tensor) -> LossTerms:
        result = self.net.forward(degraded, self.variant)
        targets = decompose_input(clean, self.net.mode, levels=len(result.inputs))
        levels = result.levels
        return self.loss.terms(
            [result.outputs[level] for level in levels],
            [targets[level] for level in levels],
            levels,
        )

    def train_step(self) -> StepRecord:
        started = time.perf_counter()
        self.net.train()
        batch = self.sampler.batch_at(self.step)

        self.optimizer.zero_grad()
        terms = self.compute_loss(batch.degraded, batch.clean)
        loss_value = terms.total.item()
        if not math.isfinite(loss_value):
            raise TrainingAborted(f"Loss became {loss_value} at step {self.step}", step=self.step)
        backward(terms.total)

        if self.train_config.clip_grad_norm is not None:
            clip_grad_norm(self.optimizer.params, self.train_config.clip_grad_norm)
        lr = cosine_lr(self.step, self.schedule)
        try:
            self.optimizer.step(lr)
        except TrainingAborted as e:
            e.step = self.step
            raise

        values = terms.as_dict()
        record = StepRecord(self.step, lr, loss_value, values["spatial"], values["wavelet"], values["fourier"])
        self.log.append(record)
        self.step += 1

        elapsed = time.perf_counter() - started
        self.metrics.record_train_step(elapsed, lr, values)
        self.stats["steps_completed"] += 1
        self.stats["last_loss"] = loss_value
        self.stats["last_lr"] = lr
        self.stats["seconds"] += elapsed
        if record.step % self.train_config.log_every == 0:
            logger.info("step %d: loss=%.6f lr=%.3e", record.step, loss_value, lr)
        else:
            logger.debug("step %d: loss=%.6f lr=%.3e", record.step, loss_value, lr)
        return record

    def save(self) -> Optional[Path]:
        if self.checkpoint_dir is None:
            return None
        path = save_checkpoint(
            self.checkpoint_dir / CHECKPOINT_NAME, self.net, self.optimizer.state,
            seed=self.train_config.seed, step=self.step,
        )
        self.stats["checkpoints_written"] += 1
        return path

    def run(self, steps: Optional[int] = None) -> TrainingLog:
        """Train until ``steps`` more updates (default: up to ``train.steps`` total)."""
        target = self.step + steps if steps is not None else self.train_config.steps
        every = self.train_config.checkpoint_every
        if self.step >= target:
            logger.info("Nothing to train: at step %d of %d", self.step, target)
            return self.log
        logger.info("Training steps %d..%d", self.step, target - 1)
        self.log.rewind(self.step)
        try:
            while self.step < target:
                self.train_step()
                if every and self.step % every == 0:
                    self.save()
        except TrainingAborted:
            logger.error("Training aborted at step %d", self.step, exc_info=True)
            raise
        self.save()
        logger.info("Training finished: %s", self.get_stats())
        return self.log

    def get_stats(self) -> Dict[str, Any]:
        return {**self.stats, "step": self.step}


def train(
    net: SWFormerNet,
    corpus: Sequence[PairedSample],
    loss_cfg: Optional[LossConfig] = None,
    sched: Optional[Schedule] = None,
    steps: int = 0,
    seed: int = 0,
    train_cfg: Optional[TrainConfig] = None,
    optim_cfg: Optional[OptimConfig] = None,
    log_path: Optional[Union[str, Path]] = None,
) -> TrainingLog:
    """Train ``net`` in place for ``steps`` updates and return the log."""
    train_cfg = (train_cfg or TrainConfig()).model_copy(update={"steps": steps, "seed": seed})
    trainer = Trainer(net, corpus, loss_cfg, optim_cfg, sched, train_cfg, log_path=log_path)
    return trainer.run()


def training_psnr(net: SWFormerNet, pairs: Sequence[PairedSample], variant: Optional[str] = None) -> float:
    """Mean PSNR of the deepest exit over whole training images, in inference mode."""
    was_training = net.training
    net.eval()
    try:
        scores = []
        for pair in pairs:
            restored = net.restore(Tensor(pair.degraded.data[None]), variant)
            deepest = restored[min(restored, key=EXIT_LEVELS.get)]
            scores.append(psnr(deepest, pair.clean.data))
    finally:
        net.train(was_training)
    return float(np.mean(scores))
