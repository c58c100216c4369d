"""Jump times, jump counts and Laplace transforms of CBI processes.

Formula evaluation (:mod:`laws`) rests on adaptive ODE flows
(:mod:`odeflow`) of the branching and immigration mechanisms
(:mod:`mechanisms`).  :mod:`simkit` simulates paths and :mod:`oracle`
provides independent reference values.
"""

from .errors import CbiError
from .measures import Atom, ExpDensity, JumpSet, LevyMeasure, TemperedPowerLaw
from .odeflow import SolverConfig
from .params import CbiParams, validate

__all__ = [
    "Atom",
    "CbiError",
    "CbiParams",
    "ExpDensity",
    "JumpSet",
    "LevyMeasure",
    "SolverConfig",
    "TemperedPowerLaw",
    "validate",
]
__version__ = "0.1.0"
