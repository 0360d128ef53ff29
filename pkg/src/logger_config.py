import logging
import os
import sys

from dotenv import load_dotenv

load_dotenv()

LOG_FORMAT = "[%(asctime)s] [%(levelname)s] [%(module)s]: %(message)s"
DATE_FORMAT = '%Y-%m-%d %H:%M:%S'


def setup_logger(name=None, level=None):
    """
    Configures a logger with the project's color scheme and format.
    Level defaults to the LOG_LEVEL environment variable (INFO if unset).
    """
    logger = logging.getLogger(name)
    level = level or os.getenv("LOG_LEVEL", "INFO").upper()
    logger.setLevel(getattr(logging, level, logging.INFO))

    if logger.hasHandlers():
        logger.handlers.clear()

    handler = logging.StreamHandler(sys.stdout)

    try:
        import colorlog
        log_colors = {
            'DEBUG': 'white',
            'INFO': 'cyan',
            'WARNING': 'yellow',
            'ERROR': 'red',
            'CRITICAL': 'bold_red',
        }
        formatter = colorlog.ColoredFormatter(
            "%(log_color)s" + LOG_FORMAT,
            datefmt=DATE_FORMAT,
            reset=True,
            log_colors=log_colors
        )
    except ImportError:
        # Fallback if colorlog is missing
        formatter = logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT)

    handler.setFormatter(formatter)
    logger.addHandler(handler)
    logger.propagate = False

    return logger


def add_file_handler(path, target=None):
    """Mirrors `target` (the shared logger by default) into a plain-text file; idempotent per path."""
    target = target or logger
    path = os.path.abspath(path)
    for handler in target.handlers:
        if isinstance(handler, logging.FileHandler) and handler.baseFilename == path:
            return handler
    handler = logging.FileHandler(path)
    handler.setFormatter(logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT))
    target.addHandler(handler)
    return handler


def remove_file_handler(handler, target=None):
    target = target or logger
    target.removeHandler(handler)
    handler.close()


# Shared instance for easy import
logger = setup_logger("Sardonics")
