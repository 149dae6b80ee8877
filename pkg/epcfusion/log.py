import sys
from pathlib import Path

from loguru import logger

FORMAT = "<green>{time:HH:mm:ss}</green> | <level>{level: <7}</level> | <cyan>{name}</cyan> - {message}"


def configure_logging(level: str = "INFO", log_file: Path | None = None):
    """Route loguru to stderr and, optionally, to a file next to the run's artifacts."""
    logger.remove()
    logger.add(sys.stderr, level=level, format=FORMAT)
    if log_file is not None:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        logger.add(log_file, level="DEBUG", mode="a", encoding="utf-8")
    return logger
