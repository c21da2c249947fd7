"""
Logger utility for MatrixMemoryLab.

Provides functions to configure and retrieve loggers with console and file handlers.
"""

import pathlib
import logging

from logging.handlers import TimedRotatingFileHandler
from rich.logging import RichHandler

from app.config import settings

FORMATTER = logging.Formatter(
    "%(levelname)s | %(asctime)s | %(name)s | %(message)s"
)


def get_console_handler():
    """
    Create and return a console log handler with rich output.
    Returns:
        RichHandler: Configured console handler.
    """
    console_handler = RichHandler(
        level=logging.INFO, show_path=False, markup=False
    )
    console_handler.setFormatter(logging.Formatter("%(name)s | %(message)s"))
    return console_handler


def get_file_handler():
    """
    Create and return a file log handler with daily rotation.
    The path comes from settings.LOG_FILE; its directory is created on demand.
    Returns:
        TimedRotatingFileHandler: Configured file handler.
    """
    log_path = pathlib.Path(settings.LOG_FILE)
    if not log_path.parent.exists():
        log_path.parent.mkdir(parents=True, exist_ok=True)
    file_handler = TimedRotatingFileHandler(
        log_path, when="midnight", backupCount=7
    )
    file_handler.setFormatter(FORMATTER)
    return file_handler


def get_logger(logger_name):
    """
    Return a configured logger instance with console and file handlers.
    Handlers are attached once per logger name.
    Args:
        logger_name (str): Name of the logger (usually __name__).
    Returns:
        logging.Logger: Configured logger instance.
    """
    logger = logging.getLogger(logger_name)
    logger.setLevel(logging.DEBUG)
    if not logger.handlers:
        logger.addHandler(get_console_handler())
        logger.addHandler(get_file_handler())
    logger.propagate = False
    return logger
