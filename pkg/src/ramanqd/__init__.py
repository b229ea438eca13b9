"""Simulation and analysis of a quantum-dot Raman single-photon source."""

__version__ = "0.1.0"

from .levels import (build_level_system, LevelSystem, NoiseParams, ValidationError,
                     boltzmann_ratio, spin_flip_rates, DOWN, UP, TRION_DOWN, TRION_UP)
from .pulses import make_envelope, build_sequence, Pulse, Sequence, SchedulingError
from .dynamics import evolve_master, mcwf_run, two_time_correlation, g1_spectrum
from .fitkit import FitResult
from .photostream import Histogram, Spectrum, EtalonModel

__all__ = ["build_level_system", "LevelSystem", "NoiseParams", "ValidationError",
           "boltzmann_ratio", "spin_flip_rates", "DOWN", "UP", "TRION_DOWN", "TRION_UP",
           "make_envelope", "build_sequence", "Pulse", "Sequence", "SchedulingError",
           "evolve_master", "mcwf_run", "two_time_correlation", "g1_spectrum",
           "FitResult", "Histogram", "Spectrum", "EtalonModel", "__version__"]
