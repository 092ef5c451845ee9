import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

# Lamb Framework
from lamb.exc import ServerError, InvalidParamValueError

# Project
from hardy.utils import make_rng, parallel_map
from hardy.dilation import (
    ball_diameter,
    build_ellipsoid,
    ball_membership,
    ball_half_widths,
    check_determinant,
    validate_dilation,
    eigenvalue_moduli,
    transpose_dilation,
    monte_carlo_ball_volume,
)
from hardy.exceptions import NotExpansiveError, SingularMatrixError, DimensionMismatchError

from .factories import DilationFactory, DilatedBallFactory


def test_determinant_and_moduli(diagonal, shear):
    assert diagonal.b == pytest.approx(6.0)
    assert diagonal.lambda_abs.tolist() == pytest.approx([2.0, 3.0])
    assert shear.b == pytest.approx(6.0)
    assert shear.lambda_abs.tolist() == pytest.approx([2.0, 3.0])
    assert diagonal.lambda_minus == pytest.approx(1.95)
    assert 1.0 < diagonal.lambda_minus < 2.0 < 3.0 < diagonal.lambda_plus


def test_rotation_scaling_has_complex_moduli():
    d = DilationFactory(matrix=[[1.0, -1.0], [1.0, 1.0]])
    assert d.lambda_abs.tolist() == pytest.approx([math.sqrt(2), math.sqrt(2)])
    assert eigenvalue_moduli(d.matrix).tolist() == pytest.approx([math.sqrt(2), math.sqrt(2)])


def test_not_expansive():
    with pytest.raises(NotExpansiveError):
        validate_dilation([[1.0, 1.0], [0.0, 1.0]])


def test_singular_checked_before_expansive():
    with pytest.raises(SingularMatrixError):
        validate_dilation([[2.0, 4.0], [1.0, 2.0]])


def test_not_square():
    with pytest.raises(DimensionMismatchError):
        validate_dilation([[2.0, 0.0, 0.0], [0.0, 3.0, 0.0]])


def test_bad_lambda_minus():
    with pytest.raises(InvalidParamValueError):
        DilationFactory(lambda_minus=2.5)


@pytest.mark.parametrize("matrix", [[[2.0, 0.0], [0.0, 3.0]], [[2.0, 1.0], [0.0, 3.0]], [[1.0, -1.0], [1.0, 1.0]]])
def test_series_matches_lyapunov(matrix):
    d = DilationFactory(matrix=matrix)
    lyapunov = build_ellipsoid(d.matrix, d.delta, method="lyapunov")
    difference = np.linalg.norm(lyapunov.P - d.ellipsoid.P) / np.linalg.norm(d.ellipsoid.P)
    assert difference < 1e-10


def test_unit_volume_ellipsoid(dilation):
    assert dilation.ellipsoid.volume == pytest.approx(1.0, rel=1e-10)


def test_powers(shear):
    assert np.allclose(shear.power(3) @ shear.power(-3), np.eye(2))
    assert np.allclose(shear.power(2), shear.matrix @ shear.matrix)
    stack = shear.power_stack(np.array([-1, 0, 1]))
    assert np.allclose(stack[1], np.eye(2))
    assert np.allclose(stack[2], shear.matrix)


def test_powers_from_many_threads():
    d = DilationFactory(matrix=[[2.0, 1.0], [0.0, 3.0]])
    indices = [k % 7 - 3 for k in range(64)]
    powers = parallel_map(d.power, indices, 8)
    for i, value in zip(indices, powers):
        assert value is d.power(i)
        assert np.allclose(value, np.linalg.matrix_power(d.matrix if i >= 0 else d.inverse, abs(i)))
    assert set(range(-3, 4)) <= set(d._powers)


def test_determinant_check_is_relative():
    moduli = np.array([2.0, 3.0])
    check_determinant(6.0 * (1 + 1e-12), moduli)
    with pytest.raises(ServerError):
        check_determinant(6.0 * (1 + 1e-9), moduli)
    check_determinant(6e8 * (1 + 5e-11), np.array([2e4, 3e4]))


def test_balls_are_nested(dilation, rng):
    points = rng.uniform(-3.0, 3.0, size=(2000, 2))
    inner = ball_membership(dilation, points, 0)
    outer = ball_membership(dilation, points, 1)
    assert np.all(outer[inner])


def test_contraction(dilation, rng):
    # r Delta is inside A Delta
    points = rng.standard_normal((2000, 2))
    ellipsoid = dilation.ellipsoid
    on_boundary = points / ellipsoid.norm(points)[:, None] * ellipsoid.radius * dilation.expansion_r * 0.999
    assert np.all(ball_membership(dilation, on_boundary, 1))


@pytest.mark.parametrize("i", [-1, 0, 2])
def test_monte_carlo_volume(diagonal, i):
    volume = monte_carlo_ball_volume(diagonal, i, 200_000, make_rng(7, i))
    assert volume == pytest.approx(diagonal.b**i, rel=0.03)


def test_half_widths_bound_diameter(shear):
    half = ball_half_widths(shear, 1)
    assert ball_diameter(shear, 1) <= 2.0 * np.linalg.norm(half) + 1e-12
    assert ball_diameter(shear, 1) >= 2.0 * half.max() - 1e-12


def test_translated_ball(diagonal):
    ball = DilatedBallFactory(center=(5.0, -5.0), index=2)
    assert ball.contains(diagonal, [5.0, -5.0])
    assert not ball.contains(diagonal, [0.0, 0.0])
    assert ball.volume(diagonal) == pytest.approx(36.0)


def test_transpose(shear):
    transposed = transpose_dilation(shear)
    assert np.allclose(transposed.matrix, shear.matrix.T)
    assert transposed.b == pytest.approx(shear.b)


@given(
    st.floats(1.2, 5.0),
    st.floats(1.2, 5.0),
    st.booleans(),
    st.floats(0.05, 0.9),
)
@settings(max_examples=25, deadline=None, derandomize=True)
def test_diagonal_expansive_gate(a, c, flip, small):
    d = validate_dilation([[-a if flip else a, 0.0], [0.0, c]])
    assert d.b == pytest.approx(a * c)
    with pytest.raises(NotExpansiveError):
        validate_dilation([[a, 0.0], [0.0, small]])
