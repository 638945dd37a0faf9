# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.
import logging as _logging
import os as _os
import sys as _sys
from typing import Optional as _Optional, Union as _Union

LOG_LEVEL_ENV_VAR = "LAGFLOW_LOG_LEVEL"

_root_logger = _logging.getLogger()
_installed_handlers: list[_logging.Handler] = []


class _RunModeLoggerFilter(_logging.Filter):
    """Filter that prepends the run mode to logs"""

    def __init__(self, mode: str) -> None:
        super().__init__()
        self.mode = mode

    def filter(self, record: _logging.LogRecord) -> bool:
        if not getattr(record, "_lagflow_prefixed", False):
            record.msg = f"[{self.mode}] {record.msg}"
            record._lagflow_prefixed = True
        return True


def configure_logging(mode: str, level: _Optional[_Union[str, int]] = None) -> None:
    """
    Sends INFO and below to stdout and WARNING and above to stderr, with every message
    prefixed by the run mode. Calling it again replaces the handlers it installed before.
    """
    if level is None:
        level = _os.environ.get(LOG_LEVEL_ENV_VAR, "INFO")
    if isinstance(level, str):
        level = level.upper()

    for handler in _installed_handlers:
        _root_logger.removeHandler(handler)
    _installed_handlers.clear()

    formatter = _logging.Formatter("[%(asctime)s] %(message)s")
    mode_filter = _RunModeLoggerFilter(mode)

    stdout_handler = _logging.StreamHandler(_sys.stdout)
    stdout_handler.addFilter(lambda record: record.levelno <= _logging.INFO)
    stderr_handler = _logging.StreamHandler(_sys.stderr)
    stderr_handler.addFilter(lambda record: record.levelno > _logging.INFO)

    for handler in (stdout_handler, stderr_handler):
        handler.setFormatter(formatter)
        handler.addFilter(mode_filter)
        _root_logger.addHandler(handler)
        _installed_handlers.append(handler)

    _root_logger.setLevel(level)
