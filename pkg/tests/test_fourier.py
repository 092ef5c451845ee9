import math

import numpy as np
import pytest

# Lamb Framework
from lamb.exc import InvalidParamValueError

# Project
from hardy.atoms import AtomicSum
from hardy.utils import make_rng
from hardy.fourier import (
    exp_remainder,
    ray_points,
    shell_points,
    required_level,
    fourier_derivative,
    fourier_finite_sum,
    lipschitz_estimate,
    fourier_atom_direct,
    fourier_via_dilation_identity,
)
from hardy.exceptions import PhaseUnderResolvedError
from hardy.quasi_norm import QuasiNormEvaluator

from .factories import AtomFactory, DilatedBallFactory, MassiveBumpFactory


@pytest.fixture
def atom(diagonal, pv):
    return AtomFactory(d=diagonal, pv=pv, ball=DilatedBallFactory(center=(0.4, -0.3), index=1))


def _frequencies(atom, rng, count=20):
    directions = rng.standard_normal((count, 2))
    scale = 10.0 ** rng.uniform(-1.5, 0.3, size=(count, 1))
    return directions * scale @ np.linalg.inv(atom.dilation.power(atom.ball.index))


def test_direct_matches_dilation_identity(atom, rng):
    points = _frequencies(atom, rng)
    direct = fourier_atom_direct(atom, points)
    identity = fourier_via_dilation_identity(atom, points)
    usable = direct.resolved & identity.resolved
    assert np.any(usable)
    gap = np.abs(direct.values - identity.values)[usable] / atom.l1_norm()
    assert np.max(gap) <= 1e-6


def test_transform_vanishes_at_origin(atom):
    at_origin = fourier_atom_direct(atom, np.zeros((1, 2)), series=False)
    assert abs(at_origin.values[0]) <= 1e-8 * atom.l1_norm()
    series = fourier_atom_direct(atom, np.zeros((1, 2)))
    assert abs(series.values[0]) <= 1e-12 * atom.l1_norm()
    assert abs(series.values[0] - at_origin.values[0]) <= 1e-12 * atom.l1_norm()
    assert series.floor[0] < 1e-15 * atom.l1_norm()


def test_series_keeps_non_vanishing_moments(diagonal, pv):
    bump = MassiveBumpFactory(atom__d=diagonal, atom__pv=pv)
    point = [[1e-4, 2e-4]]
    series = fourier_atom_direct(bump, point)
    plain = fourier_atom_direct(bump, point, series=False)
    assert series.values[0] == pytest.approx(plain.values[0], rel=1e-9)
    assert abs(series.values[0]) > 0.99 * bump.l1_norm()
    assert abs(series.values[0]) > 1e3 * series.floor[0]


def test_bounded_by_l1(atom, rng):
    points = rng.uniform(-3.0, 3.0, size=(50, 2))
    evaluation = fourier_atom_direct(atom, points)
    assert evaluation.l1_bound == pytest.approx(atom.l1_norm())
    assert np.all(np.abs(evaluation.values) <= atom.l1_norm() * (1.0 + 1e-2))


def test_exp_remainder():
    z = np.array([0.5j, -0.3 + 0.2j, 1e-3, -0.9j])
    for order in (0, 1, 2, 4):
        taylor = sum(z**k / math.factorial(k) for k in range(order + 1))
        assert np.allclose(exp_remainder(z, order), np.exp(z) - taylor, rtol=1e-9, atol=1e-15)
    # no cancellation for tiny arguments
    tiny = np.array([1e-6 + 0j])
    assert exp_remainder(tiny, 2)[0] == pytest.approx(1e-18 / 6, rel=1e-6)


def test_series_branch_matches_quadrature(atom, rng):
    points = _frequencies(atom, rng) * 1e-2
    series = fourier_atom_direct(atom, points)
    plain = fourier_atom_direct(atom, points, series=False)
    assert np.allclose(series.values, plain.values, rtol=0.0, atol=1e-7 * atom.l1_norm())


def test_derivative_order_limit(atom):
    with pytest.raises(InvalidParamValueError):
        fourier_derivative(atom, (3, 0), [[0.1, 0.1]])
    with pytest.raises(InvalidParamValueError):
        fourier_derivative(atom, (1,), [[0.1, 0.1]])
    evaluation = fourier_derivative(atom, (1, 1), [[0.1, 0.2], [1.0, -1.0]])
    assert len(evaluation) == 2
    assert evaluation.method == "canonical"



@pytest.mark.parametrize("alpha", [(1, 0), (0, 1)])
def test_derivative_matches_finite_difference(shear, pv, alpha):
    atom = AtomFactory(d=shear, pv=pv, ball=DilatedBallFactory(center=(0.3, -0.2), index=0))
    points = np.array([[0.3, -0.2], [0.05, 0.1], [-0.4, 0.25]])
    step = 1e-5 * np.asarray(alpha, dtype=float)
    forward = fourier_derivative(atom, (0, 0), points + step, series=False)
    backward = fourier_derivative(atom, (0, 0), points - step, series=False)
    derivative = fourier_derivative(atom, alpha, points, series=False)
    assert np.all(derivative.levels == 0)
    difference = (forward.values - backward.values) / 2e-5
    assert np.allclose(derivative.values, difference, rtol=0.0, atol=1e-7 * derivative.l1_bound)


def test_derivative_of_order_zero_is_rescaled_transform(shear, pv, rng):
    atom = AtomFactory(d=shear, pv=pv, ball=DilatedBallFactory(center=(0.3, -0.2), index=1))
    points = rng.uniform(-0.5, 0.5, size=(8, 2))
    canonical = fourier_derivative(atom, (0, 0), points)
    pulled = points @ np.linalg.inv(shear.power(1))
    direct = fourier_atom_direct(atom, pulled)
    shift = np.exp(2j * math.pi * (pulled @ atom.ball.center_array))
    expected = shift * direct.values / atom.ball.volume(shear)
    assert np.allclose(canonical.values, expected, rtol=0.0, atol=1e-10 * canonical.l1_bound)


def test_derivative_series_near_origin(shear, pv):
    atom = AtomFactory(d=shear, pv=pv, ball=DilatedBallFactory(center=(0.3, -0.2), index=0))
    points = np.array([[1e-3, 2e-3], [-2e-3, 1e-3]])
    for alpha in [(0, 0), (1, 0), (1, 1), (0, 2)]:
        series = fourier_derivative(atom, alpha, points)
        plain = fourier_derivative(atom, alpha, points, series=False)
        assert np.allclose(series.values, plain.values, rtol=0.0, atol=1e-12 * series.l1_bound)


def test_finite_sum_is_linear(diagonal, pv, atom, rng):
    other = AtomFactory(d=diagonal, pv=pv, ball=DilatedBallFactory(center=(-1.0, 0.5), index=0))
    sum_ = AtomicSum(np.array([0.5, 0.25j]), (atom, other))
    points = rng.uniform(-1.0, 1.0, size=(15, 2))
    combined = fourier_finite_sum(sum_, points)
    expected = 0.5 * fourier_atom_direct(atom, points).values + 0.25j * fourier_atom_direct(other, points).values
    assert np.allclose(combined.values, expected, rtol=1e-12, atol=1e-15)
    assert combined.l1_bound == pytest.approx(0.5 * atom.l1_norm() + 0.25 * other.l1_norm())


def test_empty_sum():
    with pytest.raises(InvalidParamValueError):
        fourier_finite_sum(AtomicSum(np.zeros(0), ()), [[0.0, 0.0]])


def test_under_resolved_points_are_flagged(atom):
    evaluation = fourier_atom_direct(atom, [[1e3, 1e3]], max_level=0)
    assert evaluation.under_resolved_count == 1
    with pytest.raises(PhaseUnderResolvedError):
        evaluation.require_resolved()
    rows = evaluation.rows()
    assert rows[0]["under_resolved"] is True
    assert rows[0]["method"] == "direct"


def test_required_level_grows_with_frequency():
    spacing = np.array([0.1, 0.1])
    freqs = np.array([[0.01, 0.0], [1.0, 1.0], [4.0, 4.0]])
    levels = required_level(spacing, freqs)
    assert levels[0] == 0
    assert levels[0] <= levels[1] <= levels[2]


def test_lipschitz_witness(atom):
    estimate = lipschitz_estimate(atom, 2.0, 100, make_rng(5))
    assert estimate.passed
    assert estimate.empirical > 0


def test_sampling_helpers(shear, rng):
    directions, t, points = ray_points(2, 4, rng, per_ray=10)
    assert points.shape == (40, 2)
    assert np.allclose(np.linalg.norm(directions, axis=1), 1.0)
    assert t[0] == pytest.approx(1e-4)

    e_star = QuasiNormEvaluator.for_transpose(shear)
    points, shells = shell_points(e_star, (-2, 2), 8, rng)
    assert points.shape == (40, 2)
    assert np.array_equal(e_star.index(points), shells)
