# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.

import numpy as np
import pytest

from lagflow.errors import InvalidInputError
from lagflow.models import PerturbedGenerator, QuadraticGenerator, SteadyControl, StepControl


class TestStepControl:
    def test_defaults(self) -> None:
        # WHEN
        control = StepControl()

        # THEN
        assert control.cfl == 0.5
        assert control.tol_c == 1e-6
        assert control.tol_b == 1e-12
        assert control.newton_max_iter == 50
        assert control.max_halvings == 10
        assert control.tol_mon is None

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"cfl": 1.5},
            {"cfl": 0.0},
            {"tol_c": 0.0},
            {"tol_b": -1e-12},
            {"tol_mon": 0.0},
            {"max_steps": 0},
            {"report_every": 0},
            {"max_halvings": -1},
            {"snapshot_every": -2},
        ],
    )
    def test_rejects(self, kwargs: dict) -> None:
        with pytest.raises(InvalidInputError):
            StepControl(**kwargs)

    def test_accepts_full_cfl(self) -> None:
        assert StepControl(cfl=1.0).cfl == 1.0


class TestSteadyControl:
    @pytest.mark.parametrize("kwargs", [{"tol_s": 0.0}, {"max_iter": 0}, {"max_line_search": 0}])
    def test_rejects(self, kwargs: dict) -> None:
        with pytest.raises(InvalidInputError):
            SteadyControl(**kwargs)


class TestQuadraticGenerator:
    def test_evaluates(self) -> None:
        # GIVEN
        generator = QuadraticGenerator.create(2, [[2.0, 0.0], [0.0, 1.0]], [1.0, 0.0], [0.5, 0.5])
        x = np.array([[0.5, 0.5], [1.5, 0.5], [0.0, 0.0]])

        # WHEN
        values = generator(x)

        # THEN
        np.testing.assert_allclose(values, [0.5, 2.5, 0.375])

    @pytest.mark.parametrize(
        "A, b, match",
        [
            ([[1.0, 0.0], [0.0, -1.0]], None, "positive-definite"),
            ([[1.0, 2.0], [0.0, 1.0]], None, "symmetric"),
            ([[1.0, 0.0, 0.0]], None, "2x2"),
            (np.eye(2), [1.0], "components"),
        ],
    )
    def test_rejects(self, A, b, match: str) -> None:
        with pytest.raises(InvalidInputError, match=match):
            QuadraticGenerator.create(2, A, b)


class TestPerturbedGenerator:
    @pytest.fixture
    def generator(self) -> PerturbedGenerator:
        return PerturbedGenerator(
            quadratic=QuadraticGenerator.create(2, np.eye(2)),
            epsilon=0.1,
            bump_center=np.array([0.2, 0.0]),
            bump_width=0.5,
        )

    def test_bump_is_compactly_supported(self, generator: PerturbedGenerator) -> None:
        # GIVEN
        x = np.array([[0.2, 0.0], [0.2, 0.49], [0.8, 0.0], [-0.5, 0.0]])

        # WHEN
        bump = generator.bump(x)

        # THEN
        assert bump[0] == pytest.approx(1.0)
        assert 0 < bump[1] < 1
        np.testing.assert_array_equal(bump[2:], 0.0)

    def test_adds_bump_to_quadratic(self, generator: PerturbedGenerator) -> None:
        # GIVEN
        x = np.array([[0.2, 0.0]])

        # THEN
        np.testing.assert_allclose(generator(x), [0.02 + 0.1])

    @pytest.mark.parametrize(
        "center, width",
        [(np.array([0.0]), 0.25), (np.array([0.0, 0.0]), 0.0)],
    )
    def test_rejects(self, center: np.ndarray, width: float) -> None:
        with pytest.raises(InvalidInputError):
            PerturbedGenerator(
                quadratic=QuadraticGenerator.create(2, np.eye(2)),
                epsilon=0.1,
                bump_center=center,
                bump_width=width,
            )
