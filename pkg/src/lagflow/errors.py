# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.
from __future__ import annotations

from typing import Optional, Sequence


class LagflowError(Exception):
    """Base class for every error raised by lagflow"""


class InvalidInputError(LagflowError, ValueError):
    """Raised when a domain, grid, generator or control parameter is rejected"""


class ConfigError(InvalidInputError):
    def __init__(self, message: str, *, line: Optional[int] = None, key: Optional[str] = None):
        location = []
        if line is not None:
            location.append(f"line {line}")
        if key is not None:
            location.append(f"key '{key}'")
        prefix = f"[{', '.join(location)}] " if location else ""
        super().__init__(f"{prefix}{message}")
        self.line = line
        self.key = key


class GridMismatchError(InvalidInputError):
    pass


class BoundaryProjectionError(LagflowError):
    def __init__(self, message: str, *, columns: Sequence[int] = ()) -> None:
        super().__init__(f"{message} (failing boundary columns: {list(columns)})")
        self.columns = list(columns)


class ConvexityLossError(LagflowError):
    def __init__(self, message: str, *, lambda1_min: float) -> None:
        super().__init__(f"{message} (min lambda1 = {lambda1_min:.6g})")
        self.lambda1_min = lambda1_min


class StepRejectedError(LagflowError):
    pass


class FlowDivergedError(LagflowError):
    pass


class OutputError(LagflowError):
    def __init__(self, message: str, *, path: object) -> None:
        super().__init__(f"{message}: {path}")
        self.path = path
