"""Master-equation, quantum-jump and steady-state dynamics of the four-level dot."""

from .master import (evolve_master, emission_waveform, emitted_photons, thermal_ground_state,
                     pure_state, MasterResult, StepSizeError, PositivityError)
from .mcwf import mcwf_run, ClickRecord, JumpStepError
from .correlation import two_time_correlation, g1_spectrum, emission_spectrum, GridTooLargeError
from .cw import cw_steady_state, cw_channel_rates, preparation_efficiency
from .rates import rate_model, pumping_time, relaxation_time

__all__ = ["evolve_master", "emission_waveform", "emitted_photons", "thermal_ground_state",
           "pure_state", "MasterResult", "StepSizeError", "PositivityError", "mcwf_run",
           "ClickRecord", "JumpStepError", "two_time_correlation", "g1_spectrum",
           "emission_spectrum", "GridTooLargeError", "cw_steady_state", "cw_channel_rates",
           "preparation_efficiency", "rate_model", "pumping_time", "relaxation_time"]
