"""Logging utilities."""

import logging
import sys
from pathlib import Path
from typing import Optional

DEFAULT_FORMAT = "[%(asctime)s] %(levelname)s - %(message)s"


def setup_logging(
    level: int = logging.INFO,
    format_str: Optional[str] = None,
    log_file: Optional[Path] = None,
) -> logging.Logger:
    """
    Setup logging for cinevae.

    Args:
        level: Logging level (default: INFO)
        format_str: Custom format string
        log_file: Optional file that receives a copy of every record

    Returns:
        Configured package logger
    """
    if format_str is None:
        format_str = DEFAULT_FORMAT

    handlers: list[logging.Handler] = [logging.StreamHandler(sys.stdout)]
    if log_file is not None:
        log_file.parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_file))

    logging.basicConfig(level=level, format=format_str, handlers=handlers, force=True)

    logger = logging.getLogger("cinevae")
    logger.setLevel(level)

    return logger


def get_logger(name: str = "cinevae") -> logging.Logger:
    """Get a logger instance."""
    return logging.getLogger(name)
