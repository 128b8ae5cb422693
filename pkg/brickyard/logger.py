"""
Logging configuration for the brickyard platform.

One "brickyard" logger owns the handlers; modules log through children named
after their dotted path (brickyard.graph.store, brickyard.apps.sandbox, ...).
"""

import logging
import os
import sys
from typing import Optional, Union

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"


def _resolve_level(level: Union[int, str]) -> int:
    """Accept 10 / "debug" / "DEBUG"; unknown names fall back to INFO."""
    if isinstance(level, int):
        return level
    resolved = logging.getLevelName(level.upper())
    return resolved if isinstance(resolved, int) else logging.INFO


def setup_logger(
    name: str = "brickyard",
    level: Union[int, str] = logging.INFO,
    log_file: Optional[str] = None
) -> logging.Logger:
    """
    Configure the platform logger.

    Safe to call again (Platform.open does, with the configured level): the
    level is updated and a file handler is added for a log_file not yet
    attached.

    Args:
        name: Logger name
        level: Level number or name (default: INFO)
        log_file: Optional file to log to alongside stdout

    Returns:
        Configured logger instance
    """
    level = _resolve_level(level)
    logger = logging.getLogger(name)
    logger.setLevel(level)

    wanted: list[logging.Handler] = []
    consoles = [h for h in logger.handlers if not isinstance(h, logging.FileHandler)]
    if not consoles:
        wanted.append(logging.StreamHandler(sys.stdout))
    attached = {getattr(h, "baseFilename", None) for h in logger.handlers}
    if log_file and os.path.abspath(log_file) not in attached:
        wanted.append(logging.FileHandler(log_file, encoding="utf-8"))

    formatter = logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT)
    for handler in wanted:
        handler.setFormatter(formatter)
        logger.addHandler(handler)
    for handler in logger.handlers:
        handler.setLevel(level)

    return logger


logger = setup_logger()


def get_module_logger(module_name: str) -> logging.Logger:
    """Child logger for a module, e.g. get_module_logger("briql.evaluator")."""
    return logging.getLogger(f"brickyard.{module_name}")
