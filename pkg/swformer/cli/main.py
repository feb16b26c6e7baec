"""``swformer`` command-line entry point."""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from swformer import __version__
from swformer.cli.commands import COMMANDS, HANDLERS, RunConfig
from swformer.config.log_setup import configure_logging
from swformer.config.settings import get_settings
from swformer.config.yaml_config import parse_overrides
from swformer.errors import ConfigError, SWFormerError
from swformer.tensor.core import set_default_dtype

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML experiment configuration")
    common.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
        help="Override a configuration key (flat dotted form); repeatable",
    )
    common.add_argument("--out", type=Path, default=Path("runs/latest"), help="Output directory")
    common.add_argument("--seed", type=int, help="Seed for training, data and initialisation")
    common.add_argument("--variant", help="Exit to run: s, m or l")
    common.add_argument("--workers", type=int, help="Worker threads for per-image work")

    parser = argparse.ArgumentParser(
        prog="swformer",
        description="Multi-domain image restoration: training, evaluation and analysis",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    helps = {
        "train": "Train a network on a synthetic or paired-folder corpus",
        "eval": "Score restored images (PSNR, SSIM) against references",
        "infer": "Restore a folder of PNGs at every exit of the chosen variant",
        "analyze": "Residual spectra and sub-band swaps for image pairs",
        "gradcheck": "Finite-difference check of every network block",
        "make-corpus": "Write a synthetic paired corpus",
    }
    for command in COMMANDS:
        subparsers.add_parser(command, parents=[common], help=helps[command])
    return parser


def _error_line(record: dict) -> None:
    print(json.dumps(record, sort_keys=True), file=sys.stderr)


def main(argv: Optional[List[str]] = None) -> int:
    """Run one subcommand; returns the process exit code."""
    args = build_parser().parse_args(argv)
    try:
        try:
            settings = get_settings()
        except ValidationError as e:
            raise ConfigError(f"Invalid SWFORMER_* environment settings: {e}") from e
        configure_logging(settings)
        set_default_dtype(settings.precision)

        run = RunConfig(
            command=args.command,
            config_path=args.config,
            overrides=parse_overrides(args.overrides),
            out_dir=args.out,
            seed=args.seed,
            variant=args.variant,
            workers=args.workers if args.workers is not None else settings.workers,
        )
        HANDLERS[run.command](run)
    except SWFormerError as e:
        logger.error("%s failed: %s", args.command, e)
        _error_line(e.to_record())
        return e.exit_code
    except Exception as e:  # noqa: BLE001
        logger.error("Unexpected error in %s: %s", args.command, e, exc_info=True)
        _error_line({"error": "internal", "exit_code": 1, "message": str(e)})
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
