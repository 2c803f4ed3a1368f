"""Logger setup shared by stages, the trainer and the CLI."""

import logging
import os
from pathlib import Path
from typing import Optional

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
ROOT_LOGGER = "collagan"


def get_logger(name: str, level: Optional[str] = None) -> logging.Logger:
    """
    Get a named logger with a single stream handler attached.

    Names are placed under the ``collagan`` hierarchy so one file handler on
    the root of that hierarchy captures every component.

    Args:
        name: Logger name (usually the stage or module name)
        level: Log level name; defaults to COLLAGAN_LOG_LEVEL or INFO

    Returns:
        Configured logger
    """
    if name != ROOT_LOGGER and not name.startswith(ROOT_LOGGER + "."):
        name = f"{ROOT_LOGGER}.{name}"
    logger = logging.getLogger(name)
    level = level or os.getenv("COLLAGAN_LOG_LEVEL", "INFO")
    logger.setLevel(getattr(logging, level.upper(), logging.INFO))

    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(handler)

    return logger


def attach_file_handler(path: Path, logger_name: str = ROOT_LOGGER) -> logging.FileHandler:
    """Mirror every component's records into a file (used for --log-file)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    root = logging.getLogger(logger_name)
    root.setLevel(logging.DEBUG)
    handler = logging.FileHandler(path, encoding="utf-8")
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    return handler


def detach_handler(handler: logging.Handler, logger_name: str = ROOT_LOGGER) -> None:
    logging.getLogger(logger_name).removeHandler(handler)
    handler.close()
