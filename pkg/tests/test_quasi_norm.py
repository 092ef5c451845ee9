import math

import numpy as np
import pytest

# Lamb Framework
from lamb.exc import ServerError

# Project
from hardy.dilation import ball_membership
from hardy.exceptions import IndexSaturationError
from hardy.quasi_norm import (
    rho,
    rho_star,
    rho_table,
    sample_shell,
    index_by_scan,
    lemma33_envelope,
    QuasiNormEvaluator,
    shell_entry_point,
    isotropic_comparison,
    quasi_triangle_constant,
)


def _points(rng, count=500):
    return rng.standard_normal((count, 2)) * 10.0 ** rng.uniform(-2.0, 2.0, size=(count, 1))


def test_search_matches_scan(evaluator, rng):
    points = _points(rng)
    assert np.array_equal(evaluator.index(points), index_by_scan(evaluator, points, (-20, 20)))


def test_homogeneity(evaluator, rng):
    points = _points(rng)
    d = evaluator.dilation
    assert np.array_equal(evaluator.index(points @ d.matrix.T), evaluator.index(points) + 1)
    assert np.allclose(evaluator.evaluate(points @ d.matrix.T), d.b * evaluator.evaluate(points))


def test_shell_membership(evaluator, rng):
    points = _points(rng)
    i = evaluator.index(points)
    d = evaluator.dilation
    for point, j in zip(points[:50], i[:50]):
        assert ball_membership(d, point, int(j) + 1)
        assert not ball_membership(d, point, int(j))


@pytest.mark.parametrize("j", [-3, 0, 4])
def test_sample_shell(evaluator, rng, j):
    samples = sample_shell(evaluator, j, 200, rng)
    assert samples.shape == (200, 2)
    assert np.all(evaluator.index(samples) == j)


def test_origin(diagonal):
    e = QuasiNormEvaluator(diagonal)
    assert rho(e, [0.0, 0.0]) == 0.0
    assert e.evaluate(np.zeros((3, 2))).tolist() == [0.0, 0.0, 0.0]
    with pytest.raises(ServerError):
        e.index([0.0, 0.0])


def test_scalar_and_batch(diagonal):
    e = QuasiNormEvaluator(diagonal)
    value = rho(e, [1.0, 1.0])
    assert isinstance(value, float)
    assert rho(e, np.array([[1.0, 1.0]]))[0] == value
    assert math.log(value, diagonal.b) == pytest.approx(round(math.log(value, diagonal.b)))


def test_saturation(diagonal):
    e = QuasiNormEvaluator(diagonal, index_range=(-3, 3))
    with pytest.raises(IndexSaturationError):
        e.index([1e6, 1e6])
    with pytest.raises(IndexSaturationError):
        e.index([1e-6, 0.0])


def test_shell_entry_point(evaluator, rng):
    for j in (-2, 0, 3):
        u = rng.standard_normal(2)
        point = shell_entry_point(evaluator, u, j)
        assert evaluator.index(point)[0] == j


def test_isotropic_comparison(isotropic, rng):
    e = QuasiNormEvaluator(isotropic)
    low, high = isotropic_comparison(e, _points(rng))
    assert low >= 1.0 - 1e-9
    assert high < isotropic.b


def test_rho_star_uses_transpose(shear, rng):
    e_star = QuasiNormEvaluator.for_transpose(shear)
    points = _points(rng, 50)
    # rows of points @ A are A^T x
    assert np.allclose(rho_star(e_star, points @ shear.matrix), shear.b * rho_star(e_star, points))


def test_quasi_triangle_and_envelope(shear, rng):
    e = QuasiNormEvaluator(shear)
    constant = quasi_triangle_constant(e, 500, rng)
    assert math.isfinite(constant)
    assert constant > 0.0
    envelope = lemma33_envelope(e, 1000, rng)
    assert math.isfinite(envelope.constant)
    assert envelope.outer_count + envelope.inner_count == 1000


def test_rho_table_columns(diagonal, rng):
    e = QuasiNormEvaluator(diagonal)
    e_star = QuasiNormEvaluator.for_transpose(diagonal)
    rows = rho_table(e, e_star, _points(rng, 10))
    assert list(rows[0]) == ["x1", "x2", "rho", "rho_star", "index_i"]
    for row in rows:
        assert row["rho"] == pytest.approx(diagonal.b ** row["index_i"])


def test_rho_table_index_from_membership(diagonal, rng):
    e = QuasiNormEvaluator(diagonal)
    e_star = QuasiNormEvaluator.for_transpose(diagonal)
    far = np.concatenate([sample_shell(e, j, 3, rng) for j in (-35, -1, 0, 1, 35)])
    points = np.concatenate([far, np.zeros((1, 2))])
    rows = rho_table(e, e_star, points)
    assert [row["index_i"] for row in rows[:-1]] == [j for j in (-35, -1, 0, 1, 35) for _ in range(3)]
    assert rows[-1]["index_i"] == ""
    assert rows[-1]["rho"] == 0.0
