# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.

from __future__ import annotations

import logging
from typing import Any, Callable, TypeVar

from .errors import LagflowError, StepRejectedError

LOG = logging.getLogger(__name__)

T = TypeVar("T")


def retry_with_halving(
    *,
    description: str,
    attempt: Callable[[float], T],
    dt: float,
    retry_on: tuple[type[Exception], ...],
    max_halvings: int,
) -> tuple[T, float]:
    """
    Calls attempt(dt), halving dt after each failure listed in retry_on.

    Returns the successful result with the dt that produced it. Raises StepRejectedError
    once max_halvings retries have been used up.
    """
    assert dt > 0, "dt must be a positive number"
    assert max_halvings >= 0, "max_halvings must be a non-negative integer"

    halvings = 0
    while True:
        try:
            return attempt(dt), dt
        except retry_on as e:
            if halvings >= max_halvings:
                raise StepRejectedError(
                    f"Gave up on {description} after {halvings} dt halvings: {e}"
                ) from e

            LOG.warning(f"{description} rejected ({e}). Retrying with dt={dt / 2:.6g}")
            halvings += 1
            dt /= 2


def logged_call(*, description: str, fn: Callable[[], Any]) -> Any:
    LOG.info(f"Starting {description}")
    try:
        result = fn()
    except LagflowError as e:
        LOG.error(f"Failed {description}")
        LOG.exception(f"The following exception was raised: {e}")
        raise
    else:
        LOG.info(f"Finished {description}")
        return result
