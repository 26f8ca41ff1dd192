import numpy as np
import pytest

from core.errors import FieldError, GridError, NonFiniteError
from lattice.grid import (
    BOUNDARY,
    EXTERIOR,
    INTERIOR,
    ScalarField,
    VectorField,
    argsup_over_sphere,
    boundary_values,
    build_grid,
    constant_field,
    interpolate,
    sample,
    sup_over_ball,
)


def test_build_grid_rejects_coarse_spacing():
    with pytest.raises(GridError):
        build_grid(2, 0.25, 0.0, 1.0)
    with pytest.raises(GridError):
        build_grid(0, 0.1, 0.0, 1.0)
    with pytest.raises(GridError):
        build_grid(2, -0.1, 0.0, 1.0)


def test_center_node_is_interior(coarse_grid):
    node = coarse_grid.nearest_node((0.0, 0.0))
    assert coarse_grid.is_interior(node)
    assert np.allclose(coarse_grid.coords([node])[0], 0.0)
    assert coarse_grid.classification(node) == "Interior"


def test_every_class_present(coarse_grid):
    classes = set(np.unique(coarse_grid.classes).tolist())
    assert classes == {EXTERIOR, BOUNDARY, INTERIOR}


def test_interior_stencils_stay_in_closed_ball(unit_grid):
    offsets = unit_grid.stencil_offsets()
    neighbors = unit_grid.interior[:, None] + offsets[None, :]
    dist = np.linalg.norm(unit_grid.coords(neighbors.reshape(-1)), axis=1)
    assert np.all(dist <= 1.0 + 1e-12)
    assert np.all(unit_grid.classes[neighbors.reshape(-1)] != EXTERIOR)


def test_nodes_in_ball_are_never_exterior(unit_grid):
    inside = np.linalg.norm(unit_grid.coords(), axis=1) <= 1.0
    assert np.all(unit_grid.classes[inside] != EXTERIOR)


def test_classes_are_read_only(coarse_grid):
    with pytest.raises(ValueError):
        coarse_grid.classes[0] = INTERIOR


def test_index_round_trip(coarse_grid):
    for node in (0, 17, coarse_grid.size - 1):
        assert coarse_grid.flat_index(coarse_grid.multi_index(node)) == node


def test_project_center_to_first_axis():
    grid = build_grid(2, 0.125, (1.0, -1.0), 2.0)
    projected = grid.project_to_sphere(np.array([[1.0, -1.0], [3.0, -1.0], [1.0, 0.0]]))
    assert projected[0] == pytest.approx([3.0, -1.0])
    assert projected[1] == pytest.approx([3.0, -1.0])
    assert projected[2] == pytest.approx([1.0, 1.0])


def test_scalar_field_rejects_nan_naming_node(coarse_grid):
    values = np.zeros(coarse_grid.size)
    values[5] = np.nan
    with pytest.raises(NonFiniteError) as info:
        ScalarField(coarse_grid, values, tag="bad")
    assert info.value.node == 5
    assert "node 5" in str(info.value)


def test_scalar_field_shape_checked(coarse_grid):
    with pytest.raises(FieldError):
        ScalarField(coarse_grid, np.zeros(3))


def test_vector_field_broadcasts_constant(coarse_grid):
    field = VectorField(coarse_grid, np.array([1.0, -2.0]))
    assert field.values.shape == (coarse_grid.size, 2)
    assert field.sup_norm() == pytest.approx(np.sqrt(5.0))


def test_sample_broadcasts_scalars(coarse_grid):
    field = sample(lambda x: 3.0, coarse_grid)
    assert np.all(field.values == 3.0)


def test_interpolation_exact_for_affine(unit_grid):
    u = sample(lambda x: 1.0 + 2.0 * x[:, 0] - 3.0 * x[:, 1], unit_grid)
    points = np.array([[0.13, -0.41], [0.0, 0.0], [-0.77, 0.05]])
    expected = 1.0 + 2.0 * points[:, 0] - 3.0 * points[:, 1]
    assert interpolate(u, points) == pytest.approx(expected, abs=1e-12)


def test_interpolation_outside_box_raises(coarse_grid):
    u = constant_field(coarse_grid, 1.0)
    with pytest.raises(GridError):
        interpolate(u, np.array([[5.0, 0.0]]))


def test_sup_over_ball_of_distance(coarse_grid):
    u = sample(lambda x: np.linalg.norm(x, axis=1), coarse_grid)
    assert sup_over_ball(u, (0.0, 0.0), 0.5) == pytest.approx(0.5)


def test_sup_over_ball_grows_with_radius(unit_grid):
    u = sample(lambda x: np.sin(7.0 * x[:, 0]) * np.cos(5.0 * x[:, 1]) + x[:, 1], unit_grid)
    sups = [sup_over_ball(u, (0.2, -0.1), r) for r in np.linspace(0.05, 1.2, 24)]
    assert all(a <= b for a, b in zip(sups, sups[1:]))


def test_interior_count_matches_disc_area():
    grid = build_grid(2, 1.0 / 64.0, (0.0, 0.0), 1.0)
    assert grid.interior.size == pytest.approx(np.pi * 64.0 ** 2, rel=0.05)


def test_sup_over_empty_ball_raises(coarse_grid):
    u = constant_field(coarse_grid, 0.0)
    with pytest.raises(GridError):
        sup_over_ball(u, (0.01, 0.01), 1e-6)


def test_shell_argmax_lies_in_shell(unit_grid):
    u = sample(lambda x: x[:, 0], unit_grid)
    value, node = argsup_over_sphere(u, (0.0, 0.0), 0.5)
    dist = np.linalg.norm(unit_grid.coords([node])[0])
    assert abs(dist - 0.5) <= unit_grid.h * np.sqrt(2) + 1e-12
    assert value == pytest.approx(unit_grid.coords([node])[0][0])


def test_boundary_values_projection_and_nodal(coarse_grid):
    g = lambda x: x[:, 0] ** 2 + x[:, 1] ** 2  # noqa: E731
    projected = boundary_values(coarse_grid, g, "projection")
    assert projected == pytest.approx(np.ones(coarse_grid.boundary.size))
    nodal = boundary_values(coarse_grid, g, "nodal")
    expected = np.sum(coarse_grid.coords(coarse_grid.boundary) ** 2, axis=1)
    assert nodal == pytest.approx(expected)


def test_boundary_values_non_finite(coarse_grid):
    with pytest.raises(NonFiniteError):
        boundary_values(coarse_grid, lambda x: np.full(x.shape[0], np.inf))


def test_same_as_compares_parameters():
    a = build_grid(2, 0.125, 0.0, 1.0)
    b = build_grid(2, 0.125, (0.0, 0.0), 1.0)
    c = build_grid(2, 0.0625, 0.0, 1.0)
    assert a.same_as(b)
    assert not a.same_as(c)


def test_one_dimensional_grid():
    grid = build_grid(1, 0.1, 0.0, 1.0)
    assert grid.dim == 1
    assert grid.interior.size > 0
    assert grid.is_interior(grid.nearest_node(0.0))
