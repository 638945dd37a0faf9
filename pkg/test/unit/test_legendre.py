# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.

import math
from dataclasses import replace

import numpy as np
import pytest

from lagflow.discretization import Field, build_grid, differentiate
from lagflow.errors import InvalidInputError
from lagflow.flow import FlowState, enforce_boundary, init_state, step
from lagflow.geometry import ConvexDomain, make_domain, pushforward_quadratic
from lagflow.legendre import (
    dual_boundary_residual,
    dual_flow_residual,
    hessian_inverse_check,
    legendre_transform,
)
from lagflow.models import QuadraticGenerator


def half_quadratic(A: np.ndarray):
    def u(x: np.ndarray) -> np.ndarray:
        return 0.5 * np.einsum("...i,ij,...j->...", x, A, x)

    return u


def wobbled_ellipse_state(rings: int) -> FlowState:
    """u = x^2 + y^2 / 2 on the unit disc plus a smooth wobble, with ghosts projected"""
    state = init_state(
        make_domain("disc", radius=1),
        None,
        QuadraticGenerator.create(2, np.diag([2.0, 1.0])),
        resolution=(rings, 2 * rings),
    )

    def wobble(x: np.ndarray) -> np.ndarray:
        return 0.05 * np.sin(x[..., 0] + 0.5) * np.cos(0.7 * x[..., 1])

    grid = state.grid
    field = state.field.with_values(
        values=state.field.values + wobble(grid.nodes),
        ghosts=state.field.ghosts + wobble(grid.ghost_nodes),
    )
    return enforce_boundary(replace(state, field=field))


def flow_until(state: FlowState, t: float) -> FlowState:
    while state.field.t < t:
        state = step(state)
    return state


class TestLegendreTransform:
    def test_interval_square(self, unit_interval: ConvexDomain) -> None:
        # GIVEN
        field = Field.sample(build_grid(unit_interval, 20), lambda x: x[..., 0] ** 2)
        target = build_grid(make_domain("interval", interval=(0, 2)), 20)

        # WHEN
        dual = legendre_transform(field, target)

        # THEN
        y = target.nodes[:, 0]
        np.testing.assert_allclose(dual.field.values, y**2 / 4, atol=1e-12)
        np.testing.assert_allclose(dual.field.ghosts, target.ghost_nodes[:, 0] ** 2 / 4, atol=1e-12)

    def test_interval_flags_extrapolated_ghosts(
        self, unit_interval: ConvexDomain, shifted_interval: ConvexDomain
    ) -> None:
        # GIVEN
        field = Field.sample(
            build_grid(unit_interval, 20), lambda x: x[..., 0] ** 2 + x[..., 0], t=0.3
        )
        target = build_grid(shifted_interval, 20)

        # WHEN
        dual = legendre_transform(field, target)

        # THEN
        assert dual.t == 0.3
        assert dual.extrapolated_ghosts.all()
        assert not dual.extrapolated[1:-1].any()
        np.testing.assert_allclose(dual.field.values, (target.nodes[:, 0] - 1) ** 2 / 4, atol=1e-12)

    @pytest.mark.parametrize(
        "A",
        [np.eye(2), np.diag([2.0, 1.0]), np.array([[1.5, 0.4], [0.4, 0.8]])],
    )
    def test_planar_quadratic_conjugate(self, unit_disc: ConvexDomain, A: np.ndarray) -> None:
        # GIVEN
        field = Field.sample(build_grid(unit_disc, (12, 24)), half_quadratic(A))
        target = build_grid(pushforward_quadratic(unit_disc, A, [0, 0], [0, 0]), (12, 24))

        # WHEN
        dual = legendre_transform(field, target)

        # THEN
        expected = half_quadratic(np.linalg.inv(A))
        np.testing.assert_allclose(dual.field.values, expected(target.nodes), atol=1e-10)
        jet = differentiate(dual.field)
        assert jet.eigenvalues[target.interior_mask()][..., 0].min() > 0

    def test_diag_conjugate_at_sample_points(self, unit_disc: ConvexDomain) -> None:
        # GIVEN
        A = np.diag([2.0, 1.0])
        field = Field.sample(build_grid(unit_disc, (12, 24)), half_quadratic(A))
        target = build_grid(pushforward_quadratic(unit_disc, A, [0, 0], [0, 0]), (12, 24))

        # WHEN
        dual = legendre_transform(field, target)

        # THEN
        y = target.nodes[[0, 5, 10], [3, 7, 20]]
        values = dual.field.values[[0, 5, 10], [3, 7, 20]]
        np.testing.assert_allclose(values, y[:, 0] ** 2 / 4 + y[:, 1] ** 2 / 2, atol=1e-10)

    def test_involution(self, unit_interval: ConvexDomain, shifted_interval) -> None:
        # GIVEN
        source = build_grid(unit_interval, 40)
        field = Field.sample(source, lambda x: x[..., 0] ** 2 + x[..., 0])

        # WHEN
        dual = legendre_transform(field, build_grid(shifted_interval, 40))
        back = legendre_transform(dual.field, source)

        # THEN
        np.testing.assert_allclose(back.field.values, field.values, atol=1e-10)

    def test_rejects_non_convex(self, unit_interval: ConvexDomain) -> None:
        # GIVEN
        grid = build_grid(unit_interval, 20)
        field = Field.sample(grid, lambda x: -x[..., 0] ** 2)

        # THEN
        with pytest.raises(InvalidInputError, match="strictly convex"):
            legendre_transform(field, grid)

    def test_rejects_dimension_mismatch(self, unit_interval, disc_grid) -> None:
        field = Field.sample(build_grid(unit_interval, 20), lambda x: x[..., 0] ** 2)
        with pytest.raises(InvalidInputError):
            legendre_transform(field, disc_grid)

    def test_reused_maximisers_give_the_same_dual(self, unit_disc: ConvexDomain) -> None:
        # GIVEN
        A = np.diag([2.0, 1.0])
        field = Field.sample(build_grid(unit_disc, (8, 16)), half_quadratic(A))
        target = build_grid(pushforward_quadratic(unit_disc, A, [0, 0], [0, 0]), (8, 16))
        searched = legendre_transform(field, target)

        # WHEN
        reused = legendre_transform(field, target, maximisers=searched.maximisers)

        # THEN
        np.testing.assert_array_equal(reused.maximisers, searched.maximisers)
        np.testing.assert_allclose(reused.field.values, searched.field.values, atol=1e-14)

    def test_rejects_maximisers_for_another_grid(self, unit_disc: ConvexDomain) -> None:
        # GIVEN
        field = Field.sample(build_grid(unit_disc, (8, 16)), half_quadratic(np.eye(2)))
        target = build_grid(unit_disc, (8, 16))

        # WHEN
        with pytest.raises(InvalidInputError) as raised:
            legendre_transform(field, target, maximisers=np.zeros(5, dtype=int))

        # THEN
        assert "maximisers" in str(raised.value)


class TestHessianInverseCheck:
    @pytest.mark.parametrize("A", [np.eye(2), np.diag([2.0, 1.0])])
    def test_planar_quadratic(self, unit_disc: ConvexDomain, A: np.ndarray) -> None:
        # GIVEN
        field = Field.sample(build_grid(unit_disc, (12, 24)), half_quadratic(A))
        target = build_grid(pushforward_quadratic(unit_disc, A, [0, 0], [0, 0]), (12, 24))
        dual = legendre_transform(field, target)

        # WHEN
        result = hessian_inverse_check(field, dual)

        # THEN
        assert result.max_discrepancy <= 1e-6
        assert result.samples > 0
        assert result.samples + result.skipped == 11 * 24

    def test_interval_quadratic(self, unit_interval, shifted_interval) -> None:
        # GIVEN
        field = Field.sample(build_grid(unit_interval, 20), lambda x: x[..., 0] ** 2 + x[..., 0])
        dual = legendre_transform(field, build_grid(shifted_interval, 20))

        # WHEN
        result = hessian_inverse_check(field, dual)

        # THEN
        assert result.max_discrepancy <= 1e-8
        assert result.samples >= 17
        assert result.samples + result.skipped == 19

    def test_planar_discrepancy_shrinks_with_resolution(self) -> None:
        # GIVEN
        discrepancies = []
        for rings in (16, 32):
            state = wobbled_ellipse_state(rings)
            target = build_grid(state.omega_tilde, state.grid.resolution)

            # WHEN
            result = hessian_inverse_check(state.field, legendre_transform(state.field, target))
            discrepancies.append(result.max_discrepancy)

        # THEN
        assert discrepancies[0] / discrepancies[1] >= 2


class TestDualFlowResidual:
    @pytest.mark.parametrize("planar", [False, True])
    def test_translating_fixed_point(self, unit_interval, unit_disc, planar: bool) -> None:
        # GIVEN
        if planar:
            grid = build_grid(unit_disc, (8, 16))
            target = build_grid(unit_disc, (8, 16))
            field = Field.sample(grid, half_quadratic(np.eye(2)))
            speed = math.pi / 2
        else:
            grid = build_grid(unit_interval, 20)
            target = build_grid(make_domain("interval", interval=(1, 3)), 20)
            field = Field.sample(grid, lambda x: x[..., 0] ** 2 + x[..., 0])
            speed = math.atan(2)
        dt = 1e-3
        later = field.with_values(
            values=field.values + speed * dt, ghosts=field.ghosts + speed * dt, t=dt
        )

        # WHEN
        result = dual_flow_residual([field, later], target)

        # THEN
        assert result.max_residual <= 1e-7
        assert result.samples > 0

    def test_planar_flow_converges_to_the_dual_flow(self) -> None:
        # GIVEN
        residuals = []
        for rings in (16, 32):
            start = wobbled_ellipse_state(rings)
            end = flow_until(start, 1e-3)
            target = build_grid(start.omega_tilde, start.grid.resolution)

            # WHEN
            result = dual_flow_residual([start.field, end.field], target)
            residuals.append(result.max_residual)

            assert result.samples > 0

        # THEN
        assert residuals[0] <= 0.05
        assert residuals[0] / residuals[1] >= 2

    def test_needs_two_slices(self, interval_grid) -> None:
        field = Field.sample(interval_grid, lambda x: x[..., 0] ** 2)
        with pytest.raises(InvalidInputError, match="two time slices"):
            dual_flow_residual([field], interval_grid)

    def test_needs_increasing_time(self, interval_grid) -> None:
        field = Field.sample(interval_grid, lambda x: x[..., 0] ** 2)
        with pytest.raises(InvalidInputError, match="increasing"):
            dual_flow_residual([field, field], interval_grid)


class TestDualBoundaryResidual:
    def test_interval(self, unit_interval, shifted_interval) -> None:
        # GIVEN
        field = Field.sample(build_grid(unit_interval, 20), lambda x: x[..., 0] ** 2 + x[..., 0])
        dual = legendre_transform(field, build_grid(shifted_interval, 20))

        # THEN
        assert dual_boundary_residual(dual, unit_interval) <= 1e-10

    def test_disc(self, unit_disc: ConvexDomain) -> None:
        # GIVEN
        A = np.diag([2.0, 1.0])
        field = Field.sample(build_grid(unit_disc, (12, 24)), half_quadratic(A))
        target = build_grid(pushforward_quadratic(unit_disc, A, [0, 0], [0, 0]), (12, 24))

        # WHEN
        dual = legendre_transform(field, target)

        # THEN
        assert dual_boundary_residual(dual, unit_disc) <= 1e-9
