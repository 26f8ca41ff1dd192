import numpy as np
import pytest

from core.errors import ConfigError, ExpressionError
from pde.expressions import compile_scalar, compile_vector, split_components

POINTS = np.array([[0.5, -1.0], [3.0, 4.0], [0.0, 0.0]])


def test_arithmetic_and_coordinates():
    expr = compile_scalar("1 + 2*x - y**2 / 4", 2)
    assert expr(POINTS) == pytest.approx(1 + 2 * POINTS[:, 0] - POINTS[:, 1] ** 2 / 4)


def test_indexed_coordinates_and_radius():
    expr = compile_scalar("x2 - r", 2)
    assert expr(POINTS) == pytest.approx(POINTS[:, 1] - np.linalg.norm(POINTS, axis=1))


def test_abs_and_unary_minus():
    expr = compile_scalar("-abs(x1) + +1", 2)
    assert expr(POINTS) == pytest.approx(1 - np.abs(POINTS[:, 0]))


def test_constant_broadcasts():
    expr = compile_scalar("2.5", 2)
    assert expr.is_constant
    assert expr(POINTS) == pytest.approx([2.5, 2.5, 2.5])


@pytest.mark.parametrize("source", ["sin(x)", "__import__('os')", "x if y else 1", "x % 2", "q + 1", "'text'"])
def test_rejects_unsupported_syntax(source):
    with pytest.raises(ExpressionError):
        compile_scalar(source, 2, key="f", lineno=7)


def test_error_carries_key_and_line():
    with pytest.raises(ConfigError) as info:
        compile_scalar("x +", 2, key="rho", lineno=12)
    assert info.value.key == "rho"
    assert info.value.lineno == 12
    assert "line 12" in str(info.value)


def test_coordinate_outside_dimension():
    with pytest.raises(ExpressionError):
        compile_scalar("z", 2)
    assert compile_scalar("x3", 3)(np.array([[1.0, 2.0, 3.0]])) == pytest.approx([3.0])


def test_split_respects_parentheses():
    assert split_components("abs(x), (y, 1)") == ["abs(x)", "(y, 1)"]


def test_vector_components_and_broadcast():
    field = compile_vector("x, -y", 2, key="B")
    assert field(POINTS) == pytest.approx(np.stack([POINTS[:, 0], -POINTS[:, 1]], axis=1))
    single = compile_vector("r", 2, key="B")
    norms = np.linalg.norm(POINTS, axis=1)
    assert single(POINTS) == pytest.approx(np.stack([norms, norms], axis=1))
    with pytest.raises(ExpressionError):
        compile_vector("1, 2, 3", 2, key="B")
