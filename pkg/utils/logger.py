"""
Logger setup module.

Lab runs log to two size-rotated files under the log directory (everything at
INFO and above, errors only) and, for command-line runs, to the console.
"""

import logging
from logging.handlers import RotatingFileHandler
from pathlib import Path

from config import settings

LOG_FORMAT = "[%(asctime)s] [%(levelname)s] [%(name)s] %(message)s"
MAX_BYTES = 10 * 1024 * 1024
BACKUPS = 5


def _attach(logger: logging.Logger, handler: logging.Handler, level: int, formatter: logging.Formatter) -> None:
    handler.setLevel(level)
    handler.setFormatter(formatter)
    logger.addHandler(handler)


def setup_logging(log_dir=None, level=None, console=None):
    """
    Configure the root logger once per process.

    Args:
        log_dir: Directory for info.log and error.log. Defaults to settings.LOG_DIR.
        level: Root level name. Defaults to settings.LOG_LEVEL.
        console (bool): Echo records to stderr. Defaults to settings.LOG_TO_CONSOLE.
    """
    root = logging.getLogger()
    if root.handlers:
        return

    root.setLevel(getattr(logging, (level or settings.LOG_LEVEL).upper(), logging.INFO))
    formatter = logging.Formatter(LOG_FORMAT, datefmt="%Y-%m-%d %H:%M:%S")

    directory = Path(log_dir or settings.LOG_DIR)
    directory.mkdir(parents=True, exist_ok=True)
    for name, handler_level in (("info.log", logging.INFO), ("error.log", logging.ERROR)):
        handler = RotatingFileHandler(directory / name, maxBytes=MAX_BYTES, backupCount=BACKUPS)
        _attach(root, handler, handler_level, formatter)

    if settings.LOG_TO_CONSOLE if console is None else console:
        _attach(root, logging.StreamHandler(), logging.INFO, formatter)
