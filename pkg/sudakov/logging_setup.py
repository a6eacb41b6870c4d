"""Log handler setup for the CLI and operator scripts."""

from __future__ import annotations

import logging
from logging.handlers import RotatingFileHandler
from pathlib import Path

from .config import PROJECT_ROOT, Settings

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
LOG_FILE_NAME = "sudakov.log"

_HANDLER_TAG = "_sudakov_handler"


def configure_logging(settings: Settings, *, console: bool = True) -> logging.Logger:
    """Attach a rotating file handler (and optionally stderr) to the package logger.

    Calling it again replaces the handlers it installed earlier.
    """
    logger = logging.getLogger("sudakov")
    logger.setLevel(getattr(logging, settings.log_level, logging.INFO))
    for handler in list(logger.handlers):
        if getattr(handler, _HANDLER_TAG, False):
            logger.removeHandler(handler)
            handler.close()

    log_dir = Path(settings.log_dir)
    if not log_dir.is_absolute():
        log_dir = PROJECT_ROOT / log_dir
    log_dir.mkdir(parents=True, exist_ok=True)

    formatter = logging.Formatter(LOG_FORMAT)
    file_handler = RotatingFileHandler(log_dir / LOG_FILE_NAME, maxBytes=1_000_000, backupCount=3, encoding="utf-8")
    file_handler.setFormatter(formatter)
    setattr(file_handler, _HANDLER_TAG, True)
    logger.addHandler(file_handler)

    if console:
        stream = logging.StreamHandler()
        stream.setFormatter(formatter)
        stream.setLevel(logging.WARNING)
        setattr(stream, _HANDLER_TAG, True)
        logger.addHandler(stream)
    logger.propagate = False
    return logger
