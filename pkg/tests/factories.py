import logging
import dataclasses

import numpy as np
import factory

# Project
from hardy.atoms import Atom, AtomicSum, generate_atom
from hardy.dilation import Dilation, DilatedBall, validate_dilation
from hardy.mixed_norm import ExponentVector

__all__ = ["DilationFactory", "DilatedBallFactory", "AtomFactory", "AtomicSumFactory", "MassiveBumpFactory"]

logger = logging.getLogger(__name__)


class DilationFactory(factory.Factory):
    class Meta:
        model = Dilation

    matrix = [[2.0, 0.0], [0.0, 3.0]]
    lambda_minus = None
    lambda_plus = None
    delta = None

    @classmethod
    def _create(cls, model_class, *args, **kwargs):
        """Dilations only come out of validation, never from raw fields"""
        return validate_dilation(**kwargs)

    _build = _create


class DilatedBallFactory(factory.Factory):
    class Meta:
        model = DilatedBall

    center = (0.0, 0.0)
    index = 0


class AtomFactory(factory.Factory):
    class Meta:
        model = Atom

    d = factory.SubFactory(DilationFactory)
    pv = factory.LazyFunction(lambda: ExponentVector(("1/2", "1")))
    ball = factory.SubFactory(DilatedBallFactory)
    r = 2.0
    s = None
    seed = factory.Sequence(lambda k: 100 + k)
    resolution = 32
    indicator_resolution = 64

    @classmethod
    def _create(cls, model_class, *args, **kwargs):
        return generate_atom(**kwargs)

    _build = _create


class AtomicSumFactory(factory.Factory):
    class Meta:
        model = AtomicSum

    atoms = factory.LazyFunction(
        lambda: (AtomFactory(), AtomFactory(ball=DilatedBallFactory(center=(0.5, -0.25), index=-1)))
    )
    coefficients = factory.LazyAttribute(lambda o: np.linspace(1.0, 0.5, len(o.atoms)))

    @classmethod
    def _create(cls, model_class, *args, **kwargs):
        return AtomicSum(kwargs["coefficients"], tuple(kwargs["atoms"]))

    _build = _create


class MassiveBumpFactory(factory.Factory):
    """Bump profile times the constant polynomial, flagged certified although its mean is not zero"""

    class Meta:
        model = Atom

    atom = factory.SubFactory(AtomFactory)

    @classmethod
    def _create(cls, model_class, *args, **kwargs):
        atom = kwargs["atom"]
        constant = np.zeros_like(atom.coefficients)
        constant[0] = 1.0
        bump = dataclasses.replace(atom, coefficients=constant, certified=True)
        samples = atom.samples.with_values(bump.evaluate(atom.samples.mesh()))
        return dataclasses.replace(bump, samples=samples)

    _build = _create
