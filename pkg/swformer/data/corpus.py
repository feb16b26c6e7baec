"""Paired corpora: generation, folder ingestion and patch sampling."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import yaml

from swformer.config.yaml_config import DataConfig, DegradationSpec
from swformer.data.io import read_png, write_png
from swformer.data.synth import CLEAN_KINDS, PairedSample, clean_image, synth_pair
from swformer.errors import IngestionError, InputNotFoundError, UsageError
from swformer.tensor.core import Tensor
from swformer.workers.pool import map_ordered

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.yaml"


def _derive_seed(*entropy: int) -> int:
    return int(np.random.SeedSequence(list(entropy)).generate_state(1, np.uint64)[0])


def make_corpus(
    n_images: int,
    size: int,
    specs: Sequence[DegradationSpec],
    seed: int = 0,
    workers: int = 1,
) -> List[PairedSample]:
    """Generate ``n_images`` procedural pairs, cycling through ``specs``.

    Per-image seeds are fixed before any work is handed to workers, so the
    corpus is a pure function of (specs, seed).
    """
    if not specs:
        raise UsageError("make_corpus needs at least one degradation spec")
    plan = []
    for index in range(n_images):
        spec = specs[index % len(specs)]
        image_seed = _derive_seed(seed, index)
        spec = spec.model_copy(update={"seed": _derive_seed(seed, spec.seed, index)})
        kind = CLEAN_KINDS[index % len(CLEAN_KINDS)]
        plan.append((index, kind, image_seed, spec))

    def build(item) -> PairedSample:
        index, kind, image_seed, spec = item
        clean = clean_image(kind, size, np.random.default_rng(image_seed))
        return synth_pair(clean, spec, image_id=f"{index:04d}_{kind}_{spec.kind}")

    pairs = map_ordered(build, plan, workers)
    logger.info("Generated %d synthetic pairs of size %dx%d (seed=%d)", len(pairs), size, size, seed)
    return pairs


def write_corpus(pairs: Sequence[PairedSample], root: Union[str, Path], workers: int = 1) -> Path:
    """Write ``degraded/``, ``clean/`` PNGs with matching stems and a YAML manifest."""
    root = Path(root)
    (root / "degraded").mkdir(parents=True, exist_ok=True)
    (root / "clean").mkdir(parents=True, exist_ok=True)

    def write(pair: PairedSample) -> None:
        write_png(root / "degraded" / f"{pair.id}.png", pair.degraded)
        write_png(root / "clean" / f"{pair.id}.png", pair.clean)

    map_ordered(write, list(pairs), workers)
    manifest = {
        "count": len(pairs),
        "pairs": [
            {
                "id": pair.id,
                "kind": pair.spec.kind if pair.spec else None,
                "seed": pair.spec.seed if pair.spec else None,
                "params": pair.spec.resolved() if pair.spec else None,
                "height": pair.size[0],
                "width": pair.size[1],
            }
            for pair in pairs
        ],
    }
    with open(root / MANIFEST_NAME, "w", encoding="utf-8") as f:
        yaml.safe_dump(manifest, f, default_flow_style=False, sort_keys=False)
    logger.info("Wrote %d pairs to %s", len(pairs), root)
    return root


def _png_stems(folder: Path) -> Dict[str, Path]:
    if not folder.is_dir():
        raise InputNotFoundError(folder, "image folder")
    return {path.stem: path for path in sorted(folder.glob("*.png"))}


def load_paired_folder(
    degraded_dir: Union[str, Path],
    clean_dir: Union[str, Path],
    workers: int = 1,
) -> List[PairedSample]:
    """Pair PNGs by stem, sorted by stem.

    Raises:
        IngestionError: a stem is present in only one folder.
        DimensionError: a pair's images differ in size.
    """
    degraded_dir, clean_dir = Path(degraded_dir), Path(clean_dir)
    degraded, clean = _png_stems(degraded_dir), _png_stems(clean_dir)
    orphans = [f"{degraded_dir.name}/{s}" for s in degraded if s not in clean]
    orphans += [f"{clean_dir.name}/{s}" for s in clean if s not in degraded]
    if orphans:
        raise IngestionError("Unmatched images", orphans)
    if not degraded:
        raise IngestionError(f"No PNG files in {degraded_dir}")

    def load(stem: str) -> PairedSample:
        return PairedSample(Tensor(read_png(degraded[stem])), Tensor(read_png(clean[stem])), stem)

    pairs = map_ordered(load, sorted(degraded), workers)
    logger.info("Loaded %d pairs from %s and %s", len(pairs), degraded_dir, clean_dir)
    return pairs


def corpus_from_config(config: DataConfig, workers: int = 1) -> List[PairedSample]:
    if config.source == "folder":
        root = Path(config.root)
        return load_paired_folder(root / "degraded", root / "clean", workers)
    return make_corpus(config.n_images, config.image_size, config.degradations, config.seed, workers)


@dataclass
class PatchBatch:
    """Aligned degraded/clean crops, (n, 3, p, p), with their bookkeeping."""
    degraded: Tensor
    clean: Tensor
    indices: List[int]
    offsets: List[Tuple[int, int]]


class PatchSampler:
    """Random aligned crops; batch ``k`` depends only on (seed, k)."""

    def __init__(self, pairs: Sequence[PairedSample], patch: int, batch: int, seed: int = 0):
        if not pairs:
            raise UsageError("PatchSampler needs at least one pair")
        if batch < 1:
            raise UsageError(f"batch size must be >= 1, got {batch}")
        smallest = min(min(p.size) for p in pairs)
        if patch > smallest:
            raise UsageError(f"patch size {patch} exceeds the smallest image side {smallest}")
        self.pairs = list(pairs)
        self.patch = patch
        self.batch = batch
        self.seed = seed

    def batch_at(self, step: int) -> PatchBatch:
        rng = np.random.default_rng([self.seed, step])
        indices = [int(i) for i in rng.integers(0, len(self.pairs), size=self.batch)]
        p = self.patch
        degraded, clean, offsets = [], [], []
        for index in indices:
            pair = self.pairs[index]
            h, w = pair.size
            top = int(rng.integers(0, h - p + 1))
            left = int(rng.integers(0, w - p + 1))
            offsets.append((top, left))
            degraded.append(pair.degraded.data[:, top:top + p, left:left + p])
            clean.append(pair.clean.data[:, top:top + p, left:left + p])
        return PatchBatch(Tensor(np.stack(degraded)), Tensor(np.stack(clean)), indices, offsets)


def sample_patches(
    pairs: Sequence[PairedSample],
    patch: int,
    batch: int,
    seed: int = 0,
    steps: Optional[int] = None,
    start: int = 0,
) -> Iterator[PatchBatch]:
    """Stream of batches from ``start``; endless when ``steps`` is None."""
    sampler = PatchSampler(pairs, patch, batch, seed)
    step = start
    while steps is None or step < start + steps:
        yield sampler.batch_at(step)
        step += 1

