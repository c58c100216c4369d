from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import settings

from cbijump.measures import Atom, ExpDensity, JumpSet, LevyMeasure, TemperedPowerLaw
from cbijump.params import CbiParams

settings.register_profile("repo", max_examples=40, deadline=None)
settings.load_profile("repo")

ZERO = LevyMeasure.zero()


def iv(a, b):
    return JumpSet.of((a, b))


def single(c=0.0, beta=0.0, B=0.0, nu=(), mu=()):
    return CbiParams.single(c, beta, B, LevyMeasure(tuple(nu)), LevyMeasure(tuple(mu)))


@pytest.fixture
def feller():
    return single(c=1.0)


@pytest.fixture
def decay_atom():
    """mu = Atom(1, 1), B = 0: marked-jump intensity x e^{-u}."""
    return single(mu=[Atom(1.0, 1.0)])


@pytest.fixture
def two_atom():
    """Frozen lattice with atoms at 1 and 2."""
    return single(B=1.5, mu=[Atom(1.0, 1.0), Atom(2.0, 0.5)])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def rich():
    """Single-type parameters using every component family."""
    return single(
        c=0.3,
        beta=0.2,
        B=-0.4,
        nu=[ExpDensity(2.0, 0.7), Atom(1.5, 0.3)],
        mu=[TemperedPowerLaw(0.5, 1.0, 0.2), Atom(0.8, 0.6), ExpDensity(1.0, 0.5)],
    )


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
