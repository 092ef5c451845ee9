import os
import json

import numpy as np
import pytest

# Lamb Framework
from lamb.exc import InvalidParamValueError

# Project
from hardy.atoms import (
    AtomicSum,
    verify_atom,
    atomic_norm,
    random_atoms,
    generate_atom,
    random_atomic_sums,
    min_vanishing_order,
    coefficient_sum_check,
    coefficient_lp_check,
)
from hardy.dilation import DilatedBall
from hardy.artifacts import read_atom_archive, write_atom_archive
from hardy.exceptions import ShapeMismatchError
from hardy.mixed_norm import ExponentVector

from .factories import AtomFactory, DilationFactory, AtomicSumFactory, DilatedBallFactory

ATOM_OPTIONS = {"resolution": 32, "indicator_resolution": 64, "i0_range": (-1, 1)}


def test_min_vanishing_order(diagonal, shear, pv, pv_ones):
    assert min_vanishing_order(diagonal, pv) == 2
    assert min_vanishing_order(shear, pv) == 2
    assert min_vanishing_order(diagonal, pv_ones) == 0
    assert min_vanishing_order(diagonal, ExponentVector(("1/4", "1"))) == 8


def test_generated_atom_is_certified(diagonal, pv):
    atom = AtomFactory(d=diagonal, pv=pv)
    assert atom.certified
    assert atom.s_order == 2
    certificate = verify_atom(diagonal, pv, atom, 64)
    assert certificate.passed
    assert certificate.moment_worst <= 1e-8
    assert certificate.size_ratio <= 1.0 + 1e-6
    assert certificate.as_dict()["passed"] is True


def test_atom_vanishes_outside_its_ball(shear, pv, rng):
    ball = DilatedBallFactory(center=(0.3, -0.2), index=1)
    atom = AtomFactory(d=shear, pv=pv, ball=ball)
    lo, hi = ball.bounding_box(shear)
    points = rng.uniform(lo - 1.0, hi + 1.0, size=(4000, 2))
    outside = ~ball.contains(shear, points)
    assert np.all(atom.evaluate(points[outside]) == 0.0)


def test_closed_form_matches_samples(diagonal, pv):
    atom = AtomFactory(d=diagonal, pv=pv)
    samples = atom.samples
    assert np.allclose(atom.evaluate(samples.mesh()), samples.values, rtol=1e-10, atol=1e-12)


def test_moment_order_below_minimum(diagonal, pv):
    with pytest.raises(InvalidParamValueError):
        AtomFactory(d=diagonal, pv=pv, s=1)


def test_size_exponent_too_small(diagonal, pv):
    with pytest.raises(InvalidParamValueError):
        AtomFactory(d=diagonal, pv=pv, r=1.0)


def test_center_dimension(diagonal, pv):
    with pytest.raises(ShapeMismatchError):
        generate_atom(diagonal, pv, DilatedBall((0.0, 0.0, 0.0), 0), resolution=32, indicator_resolution=64)


def test_explicit_higher_order(diagonal, pv_ones):
    atom = AtomFactory(d=diagonal, pv=pv_ones, s=1)
    assert atom.s_order == 1
    assert verify_atom(diagonal, pv_ones, atom, 64).passed


def test_scaled_atom_is_not_certified(diagonal, pv):
    atom = AtomFactory(d=diagonal, pv=pv)
    doubled = atom.scaled(2.0)
    assert not doubled.certified
    assert doubled.l1_norm() == pytest.approx(2.0 * atom.l1_norm())
    assert not verify_atom(diagonal, pv, doubled, 64).size_passed


def test_atomic_norm(diagonal, pv):
    atom = AtomFactory(d=diagonal, pv=pv)
    assert atomic_norm(AtomicSum(np.zeros(1), (atom,)), diagonal, pv, 32) == 0.0
    single = AtomicSum.single(atom, 0.7)
    assert atomic_norm(single, diagonal, pv, 32) == pytest.approx(0.7, rel=1e-12)

    pair = AtomicSumFactory()
    norm = atomic_norm(pair, DilationFactory(), pv, 32)
    assert norm > 0
    assert atomic_norm(pair.scaled(3.0), DilationFactory(), pv, 32) == pytest.approx(3.0 * norm, rel=1e-12)


def test_coefficient_checks(diagonal, pv):
    single = AtomicSum.single(AtomFactory(d=diagonal, pv=pv), -0.4)
    l1 = coefficient_sum_check(single, diagonal, pv, 32)
    assert l1.lhs == pytest.approx(0.4)
    assert l1.passed
    assert coefficient_lp_check(single, diagonal, pv, 32).passed

    with pytest.raises(InvalidParamValueError):
        coefficient_sum_check(single, diagonal, ExponentVector(("2", "1")), 32)


def test_atomic_sum_shapes(diagonal, pv):
    atom = AtomFactory(d=diagonal, pv=pv)
    with pytest.raises(ShapeMismatchError):
        AtomicSum(np.ones(2), (atom,))
    combined = AtomicSum.single(atom).combine(AtomicSum.single(atom, 2.0))
    assert len(combined) == 2
    points = atom.samples.mesh().reshape(-1, 2)
    assert np.allclose(combined.evaluate(points), 3.0 * atom.evaluate(points))


def test_random_atoms_prefix_is_stable(diagonal, pv):
    short = random_atoms(diagonal, pv, 2, seed=11, **ATOM_OPTIONS)
    long = random_atoms(diagonal, pv, 3, seed=11, **ATOM_OPTIONS)
    for a, b in zip(short, long):
        assert a.seed == b.seed
        assert a.ball == b.ball
        assert np.array_equal(a.samples.values, b.samples.values)
    assert [atom.ball.index for atom in long] == [-1, 0, 1]


def test_random_sums(diagonal, pv):
    sums = random_atomic_sums(diagonal, pv, 2, seed=3, max_atoms=2, **ATOM_OPTIONS)
    assert len(sums) == 2
    for sum_ in sums:
        assert 1 <= len(sum_) <= 2
        assert np.all(np.abs(sum_.coefficients) >= 0.1)


def test_archive_roundtrip(tmp_path, diagonal, shear, pv):
    atom = AtomFactory(d=diagonal, pv=pv, ball=DilatedBallFactory(center=(0.25, 0.5), index=-1))
    certificate = verify_atom(diagonal, pv, atom, 64)
    path = write_atom_archive(str(tmp_path / "atom_0000"), atom, certificate)
    with open(os.path.join(path, "metadata.json"), encoding="utf-8") as json_file:
        metadata = json.load(json_file)
    assert metadata["support_margin"] == certificate.support_margin
    assert metadata["size_margin"] == pytest.approx(certificate.size_margin)
    assert metadata["moment_margin"] == pytest.approx(certificate.moment_margin)
    assert metadata["size_margin"] > 0.0
    assert metadata["moment_margin"] > 0.0
    assert metadata["certificate"]["passed"]
    restored = read_atom_archive(path, diagonal)
    assert restored.ball == atom.ball
    assert restored.s_order == atom.s_order
    assert restored.certified
    assert np.array_equal(restored.samples.values, atom.samples.values)
    assert np.allclose(restored.evaluate(atom.samples.mesh()), atom.samples.values, rtol=1e-10, atol=1e-12)

    with pytest.raises(ShapeMismatchError):
        read_atom_archive(path, shear)
