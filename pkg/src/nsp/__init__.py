"""Radial compressible flow with a self-consistent potential, in mass coordinates.

Library layout: admissibility (exact parameter-region machinery), state (grid
and fluid state), physics (constitutive laws and discrete right-hand sides),
poisson (potential reconstruction), solver (time integration and blow-up
detection), diagnostics (estimate functionals and ledgers), config and cli
(run orchestration).
"""

__version__ = "0.1.0"

from .admissibility import ExponentPair, validate_params
from .physics import Coefficients
from .solver import BlowupReport, StepperConfig, run, step
from .state import FluidState, InitialDataSpec, MassGrid, make_initial

__all__ = [
    "ExponentPair", "validate_params", "Coefficients", "BlowupReport",
    "StepperConfig", "run", "step", "FluidState", "InitialDataSpec",
    "MassGrid", "make_initial", "__version__",
]
