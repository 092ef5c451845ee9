import math
from fractions import Fraction

import numpy as np
import pytest

# Lamb Framework
from lamb.exc import InvalidParamValueError

# Project
from hardy.dilation import DilatedBall
from hardy.exceptions import ShapeMismatchError
from hardy.mixed_norm import (
    GridFunction,
    ExponentVector,
    mixed_norm_eval,
    indicator_ball_norm,
    indicator_bound_check,
)


def test_exponent_parsing():
    pv = ExponentVector(("1/2", "1"))
    assert pv.p == (Fraction(1, 2), Fraction(1))
    assert pv.p_minus == 0.5
    assert pv.p_plus == 1.0
    assert pv.labels() == ["1/2", "1"]
    assert pv.is_hardy_admissible
    assert str(pv) == "(1/2, 1)"

    mixed = ExponentVector((0.25, "inf"))
    assert mixed.p_minus_exact == Fraction(1, 4)
    assert mixed.p_plus == math.inf
    assert not mixed.is_hardy_admissible
    assert mixed.p_underline == 0.25


@pytest.mark.parametrize("bad", [("0", "1"), ("-1/2",), ("half", "1"), ()])
def test_exponent_errors(bad):
    with pytest.raises(InvalidParamValueError):
        ExponentVector(bad)


def test_rectangle_law():
    sides = np.array([1.5, 0.75])
    rectangle = GridFunction.midpoint(np.zeros(2), sides, 20, values=np.ones((20, 20)))
    pv = ExponentVector(("1/2", "1"))
    assert mixed_norm_eval(rectangle, pv) == pytest.approx(1.5**2 * 0.75, rel=1e-12)


def test_constant_exponent_is_plain_lp(rng):
    grid = GridFunction.midpoint([-1.0, 0.0], [1.0, 3.0], [12, 9], values=rng.standard_normal((12, 9)))
    p = 1.5
    expected = float(np.sum(grid.cell_weights() * np.abs(grid.values) ** p) ** (1 / p))
    assert mixed_norm_eval(grid, ExponentVector(("3/2", "3/2"))) == pytest.approx(expected, rel=1e-12)


def test_infinite_exponent_takes_sup(rng):
    values = rng.uniform(0.0, 1.0, (8, 5))
    grid = GridFunction.midpoint([0.0, 0.0], [1.0, 1.0], [8, 5], values=values)
    expected = float(np.sum(np.max(values, axis=0) * grid.weights[1]))
    assert mixed_norm_eval(grid, ExponentVector(("inf", "1"))) == pytest.approx(expected, rel=1e-12)


def test_zero_function():
    grid = GridFunction.midpoint([0.0, 0.0], [1.0, 1.0], 4)
    assert mixed_norm_eval(grid, ExponentVector(("1/2", "1"))) == 0.0


def test_shape_mismatch():
    grid = GridFunction.midpoint([0.0, 0.0], [1.0, 1.0], 4, values=np.ones((4, 4)))
    with pytest.raises(ShapeMismatchError):
        mixed_norm_eval(grid, ExponentVector(("1", "1", "1")))
    with pytest.raises(ShapeMismatchError):
        grid.with_values(np.ones((4, 3)))


def test_csv_roundtrip(tmp_path, rng):
    values = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
    grid = GridFunction.midpoint([0.0, -1.0], [1.0, 1.0], [3, 4], values=values)
    path = tmp_path / "grid.csv"
    grid.to_csv(path)
    restored = GridFunction.from_csv(path)
    assert np.array_equal(restored.values, grid.values)
    assert all(np.array_equal(a, b) for a, b in zip(restored.axes, grid.axes))


def test_indicator_norm_of_unit_ball(diagonal, pv_ones):
    norm = indicator_ball_norm(diagonal, DilatedBall((0.0, 0.0), 0), pv_ones, 128)
    assert norm.value == pytest.approx(1.0, rel=0.03)
    assert norm.est_rel_err < 0.05


def test_indicator_resolution_floor(diagonal, pv):
    with pytest.raises(InvalidParamValueError):
        indicator_ball_norm(diagonal, DilatedBall((0.0, 0.0), 0), pv, 16)


def test_indicator_bound(diagonal, pv):
    bound = indicator_bound_check(diagonal, pv, (-1, 1), 64)
    assert [row["i"] for row in bound.rows] == [-1, 0, 1]
    assert bound.passed
    # axis-aligned: the ratio peaks at i = 0
    assert bound.constant == pytest.approx(bound.rows[1]["ratio"])


def test_indicator_bound_needs_hardy_exponents(diagonal):
    with pytest.raises(InvalidParamValueError):
        indicator_bound_check(diagonal, ExponentVector(("2", "1")), (-1, 1), 64)
