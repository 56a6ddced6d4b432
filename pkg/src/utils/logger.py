"""
Logging configuration for MKMed

Every record carries the CLI command and run seed in its `extra` dict, so the
shared log files can be filtered per run.
"""

import sys
from pathlib import Path
from typing import Optional

from loguru import logger

CONSOLE_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | "
    "<magenta>{extra[command]}</magenta> | <cyan>{name}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>"
)
FILE_FORMAT = "{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {extra[command]} seed={extra[seed]} | " \
              "{name}:{function}:{line} - {message}"


def setup_logger(
    log_dir: str = "./logs",
    level: str = "INFO",
    command: str = "-",
    seed: Optional[int] = None,
    rotation: str = "100 MB",
    retention: str = "30 days",
    to_files: bool = True
) -> None:
    """
    Configure the shared loguru logger

    Args:
        log_dir: Directory for log files
        level: Logging level
        command: CLI command tagged on every record
        seed: Run seed tagged on every file record
        rotation: When to rotate log file
        retention: How long to keep old logs
        to_files: If False, only the stderr sink is installed
    """
    logger.remove()
    logger.configure(extra={"command": command, "seed": "-" if seed is None else seed})

    logger.add(sys.stderr, format=CONSOLE_FORMAT, level=level, colorize=True)
    if not to_files:
        return

    log_path = Path(log_dir)
    log_path.mkdir(parents=True, exist_ok=True)

    # run log, and a separate file for failures (exit code != 0)
    logger.add(log_path / "mkmed_{time:YYYY-MM-DD}.log", format=FILE_FORMAT, level=level,
               rotation=rotation, retention=retention, compression="zip")
    logger.add(log_path / "errors_{time:YYYY-MM-DD}.log", format=FILE_FORMAT, level="ERROR",
               rotation=rotation, retention=retention, compression="zip")

    logger.debug(f"Logging {command!r} to {log_path}")


def get_logger(**context):
    """Shared logger, bound to extra context fields when given"""
    return logger.bind(**context) if context else logger
