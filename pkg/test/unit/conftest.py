# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.

import logging
from pathlib import Path
from typing import Generator

import pytest

from lagflow import _logging
from lagflow.discretization import Grid, build_grid
from lagflow.geometry import ConvexDomain, make_domain
from lagflow.models import QuadraticGenerator, StepControl

CONFIGS_DIR = Path(__file__).parents[2] / "configs"


@pytest.fixture
def unit_interval() -> ConvexDomain:
    return make_domain("interval", interval=(0, 1))


@pytest.fixture
def shifted_interval() -> ConvexDomain:
    return make_domain("interval", interval=(1, 3))


@pytest.fixture
def unit_disc() -> ConvexDomain:
    return make_domain("disc", radius=1)


@pytest.fixture
def tilted_ellipse() -> ConvexDomain:
    return make_domain("ellipse", matrix=[[1.0, 0.3], [0.3, 2.0]], center=[0.2, -0.1])


@pytest.fixture
def interval_grid(unit_interval: ConvexDomain) -> Grid:
    return build_grid(unit_interval, 20)


@pytest.fixture
def disc_grid(unit_disc: ConvexDomain) -> Grid:
    return build_grid(unit_disc, (8, 16))


@pytest.fixture
def line_quadratic() -> QuadraticGenerator:
    """u = x^2 + x, whose gradient maps (0, 1) onto (1, 3)"""
    return QuadraticGenerator.create(1, [[2.0]], [1.0])


@pytest.fixture
def fast_control() -> StepControl:
    return StepControl(max_steps=200, report_every=50)


@pytest.fixture(autouse=True)
def restore_root_logger() -> Generator[None, None, None]:
    root = logging.getLogger()
    level = root.level
    yield
    for handler in _logging._installed_handlers:
        root.removeHandler(handler)
    _logging._installed_handlers.clear()
    root.setLevel(level)
