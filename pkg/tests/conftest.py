import numpy as np
import pytest

from renormlab.expr import (
    CExp,
    CPoly,
    Constant,
    Coordinate,
    HarmonicPolynomial,
    RealPart,
    Scaled,
    Sum,
    Z,
)


def re_z2():
    return RealPart(CPoly([0, 0, 1]))


def re_z3():
    return RealPart(CPoly([0, 0, 0, 1]))


def re_exp_z():
    return RealPart(CExp(Z()))


def affine2(c, gx, gy):
    return Sum(
        (
            Constant(c, 2),
            Scaled(gx, Coordinate(0, 2)),
            Scaled(gy, Coordinate(1, 2)),
        )
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)


def expr_library_2d():
    """A small spread of exactly-harmonic test functions on R^2."""
    return [
        re_z2(),
        re_z3(),
        re_exp_z(),
        RealPart(CPoly([0.5, -1.0, 0.25, 1.0])),
        Sum((re_z2(), Scaled(0.5, re_exp_z()))),
        HarmonicPolynomial(2, {(2, 0): 1.0, (0, 2): -1.0, (1, 0): 0.5}),
        affine2(3.0, 2.0, -1.0),
        Scaled(-0.75, RealPart(CExp(CPoly([0, -1])))),
    ]
