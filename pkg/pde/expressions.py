"""Inline coefficient expressions for experiment configs.

Supported: numbers, + - * / **, unary minus, parentheses, abs(...),
coordinates x1..xn (x, y, z alias the first three) and r = |x|.
"""

from __future__ import annotations

import ast
from typing import Callable, List, Optional

import numpy as np

from core.errors import ExpressionError

_ALIASES = {"x": 1, "y": 2, "z": 3}

_BINARY = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


class CompiledExpression:
    """Vectorised evaluator: call with an (N, dim) array of points."""

    def __init__(self, source: str, dim: int, key: Optional[str] = None, lineno: Optional[int] = None) -> None:
        self.source = source
        self.dim = dim
        self._key = key
        self._lineno = lineno
        try:
            tree = ast.parse(source.strip(), mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse expression {source!r} for {key}: {exc.msg}", key, lineno) from None
        self._tree = tree.body
        self._validate(self._tree)

    @property
    def is_constant(self) -> bool:
        return not any(isinstance(node, ast.Name) for node in ast.walk(self._tree))

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        with np.errstate(divide="ignore", invalid="ignore"):
            value = self._eval(self._tree, points)
        return np.broadcast_to(np.asarray(value, dtype=float), (points.shape[0],)).copy()

    def _fail(self, message: str) -> ExpressionError:
        return ExpressionError(f"{message} in expression {self.source!r} for {self._key}", self._key, self._lineno)

    def _validate(self, node: ast.AST) -> None:
        if isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
                raise self._fail(f"unsupported literal {node.value!r}")
        elif isinstance(node, ast.Name):
            self._axis(node.id)
        elif isinstance(node, ast.BinOp):
            if type(node.op) not in _BINARY:
                raise self._fail(f"unsupported operator {type(node.op).__name__}")
            self._validate(node.left)
            self._validate(node.right)
        elif isinstance(node, ast.UnaryOp):
            if not isinstance(node.op, (ast.USub, ast.UAdd)):
                raise self._fail(f"unsupported unary operator {type(node.op).__name__}")
            self._validate(node.operand)
        elif isinstance(node, ast.Call):
            if not (isinstance(node.func, ast.Name) and node.func.id == "abs") or node.keywords or len(node.args) != 1:
                raise self._fail("only abs(...) may be called")
            self._validate(node.args[0])
        else:
            raise self._fail(f"unsupported syntax {type(node).__name__}")

    def _axis(self, name: str) -> Optional[int]:
        if name == "r":
            return None
        if name in _ALIASES:
            axis = _ALIASES[name]
        elif name.startswith("x") and name[1:].isdigit():
            axis = int(name[1:])
        else:
            raise self._fail(f"unknown symbol {name!r}")
        if not 1 <= axis <= self.dim:
            raise self._fail(f"coordinate {name!r} does not exist in dimension {self.dim}")
        return axis - 1

    def _eval(self, node: ast.AST, points: np.ndarray):
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            axis = self._axis(node.id)
            if axis is None:
                return np.linalg.norm(points, axis=1)
            return points[:, axis]
        if isinstance(node, ast.BinOp):
            return _BINARY[type(node.op)](self._eval(node.left, points), self._eval(node.right, points))
        if isinstance(node, ast.UnaryOp):
            operand = self._eval(node.operand, points)
            return -operand if isinstance(node.op, ast.USub) else operand
        if isinstance(node, ast.Call):
            return np.abs(self._eval(node.args[0], points))
        raise self._fail(f"unsupported syntax {type(node).__name__}")


def split_components(source: str) -> List[str]:
    """Split a vector expression on top-level commas."""
    parts, depth, current = [], 0, []
    for char in source:
        if char == "(":
            depth += 1
        elif char == ")":
            depth -= 1
        if char == "," and depth == 0:
            parts.append("".join(current).strip())
            current = []
        else:
            current.append(char)
    parts.append("".join(current).strip())
    return parts


def compile_scalar(source: str, dim: int, key: Optional[str] = None, lineno: Optional[int] = None) -> CompiledExpression:
    return CompiledExpression(source, dim, key, lineno)


def compile_vector(
    source: str, dim: int, key: Optional[str] = None, lineno: Optional[int] = None
) -> Callable[[np.ndarray], np.ndarray]:
    """Compile 'e1, e2, ...' into an (N, dim)-valued callable; one component broadcasts."""
    components = [CompiledExpression(part, dim, key, lineno) for part in split_components(source)]
    if len(components) not in (1, dim):
        raise ExpressionError(
            f"{key} needs 1 or {dim} components, got {len(components)}", key, lineno
        )

    def evaluate(points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        columns = [component(points) for component in components]
        if len(columns) == 1:
            columns = columns * dim
        return np.stack(columns, axis=1)

    return evaluate
