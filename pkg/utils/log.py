"""
Logging setup shared by the command-line entry point and scripts.
"""

import logging
import os

from utils.config import Config

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def setup_logging(level=None):
    """
    Configure the root logger with a single stream handler.

    Args:
        level (str or int, optional): Log level; falls back to the
            PROBE_LOG_LEVEL environment variable, then INFO
    """
    if level is None:
        level = os.environ.get(Config.LOG_LEVEL_ENV, "INFO")
    if isinstance(level, str):
        level = getattr(logging, level.upper(), logging.INFO)

    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)

    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel(level)
