"""Root logger configuration for command-line runs."""

import logging
from typing import Optional

import structlog

from swformer.config.settings import Settings, get_settings

TEXT_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def configure_logging(settings: Optional[Settings] = None) -> None:
    """Install one handler on the root logger.

    ``text`` uses the plain formatter; ``json`` renders each record, including
    records from ordinary ``logging.getLogger(__name__)`` loggers, as one JSON
    object through structlog's ``ProcessorFormatter``.
    """
    settings = settings or get_settings()

    if settings.log_format == "json":
        formatter: logging.Formatter = structlog.stdlib.ProcessorFormatter(
            foreign_pre_chain=[
                structlog.stdlib.add_log_level,
                structlog.stdlib.add_logger_name,
                structlog.processors.TimeStamper(fmt="iso", utc=True),
            ],
            processors=[
                structlog.stdlib.ProcessorFormatter.remove_processors_meta,
                structlog.processors.JSONRenderer(sort_keys=True),
            ],
        )
    else:
        formatter = logging.Formatter(TEXT_FORMAT)

    handler: logging.Handler
    if settings.log_file:
        handler = logging.FileHandler(settings.log_file, encoding="utf-8")
    else:
        handler = logging.StreamHandler()
    handler.setFormatter(formatter)

    root = logging.getLogger()
    for existing in list(root.handlers):
        root.removeHandler(existing)
    root.addHandler(handler)
    root.setLevel(settings.log_level)
