"""Console logging for the command-line and tool-server entry points."""

import logging
import sys
from typing import Optional, Union

from colorlog import ColoredFormatter

PLAIN_FORMAT = "[%(name)s] %(asctime)s %(levelname)-8s %(message)s"
COLOR_FORMAT = "%(log_color)s[%(name)s] %(asctime)s %(levelname)-8s%(reset)s %(message)s"

LOG_COLORS = {
    "DEBUG": "cyan",
    "INFO": "green",
    "WARNING": "yellow",
    "ERROR": "red",
    "CRITICAL": "cyan,bg_red",
}


def configure_logging(level: Union[int, str] = logging.INFO, enable_colors: Optional[bool] = None) -> logging.Logger:
    """Install a single console handler on the root logger.

    Args:
        level: Root log level
        enable_colors: Colorize output; defaults to whether stderr is a terminal

    Returns:
        The root logger
    """
    if enable_colors is None:
        enable_colors = sys.stderr.isatty()

    root_logger = logging.getLogger()
    for handler in list(root_logger.handlers):
        root_logger.removeHandler(handler)

    console = logging.StreamHandler(sys.stderr)
    if enable_colors:
        formatter: logging.Formatter = ColoredFormatter(COLOR_FORMAT, reset=True, log_colors=LOG_COLORS, style="%")
    else:
        formatter = logging.Formatter(PLAIN_FORMAT)
    console.setFormatter(formatter)
    root_logger.addHandler(console)
    root_logger.setLevel(level)
    return root_logger
