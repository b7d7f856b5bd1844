"""Classical charged particle in a plane with a growing Aharonov-Bohm flux line."""
from .actionangle import ActionAngleState, from_cartesian, to_cartesian
from .dynamics import IntegratorConfig, Trajectory, detect_hitting_time, integrate
from .errors import ABFluxError
from .model import (PhaseState, SinusoidalPotential, SystemParams, TabulatedPotential,
                    ZeroPotential)

__all__ = ["ABFluxError", "ActionAngleState", "IntegratorConfig", "PhaseState",
           "SinusoidalPotential", "SystemParams", "TabulatedPotential", "Trajectory",
           "ZeroPotential", "detect_hitting_time", "from_cartesian", "integrate", "to_cartesian"]
__version__ = "0.1.0"
