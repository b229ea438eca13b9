"""
Standard experiments on the calibrated dot: pumping and relaxation
transients, Raman photon shaping, HBT and etalon spectra.

Each function returns plain arrays plus the fitted quantity so it can be
reused by the scenario runner, the tests and the demo scripts.
"""

from dataclasses import dataclass
import math

import numpy as np

from . import fitkit
from .levels import build_level_system, NoiseParams, UP, DOWN, TRANSITION_TABLE
from .pulses import Pulse, make_envelope, build_sequence, EOM_RISE_TIME
from .dynamics.master import (evolve_master, thermal_ground_state, pure_state,
                              emission_waveform, emitted_photons)
from .dynamics.correlation import two_time_correlation, g1_spectrum
from .dynamics.cw import intensity_for_saturation, preparation_efficiency
from .dynamics.mcwf import mcwf_run
from . import photostream as ps

# --- calibrated operating point -------------------------------------------

NOISE = NoiseParams(
    sigma_charge_max=0.31,
    I_sat_nr=0.05,
    kappa_nr_coeff=3e-3,
    gamma_flip_up_down=1 / 1.75,
    T2_star_hole=2.1,
    spin_charge_ratio=0.6,
    # -ratio/2: the control resonance then carries no first-order memory of
    # the spin offset that moves the Raman photon
    spin_charge_correlation=-0.3,
)
PUMP_SATURATION = 2.0
PREP_SATURATION = 4.0
PREP_PROBE_INTENSITY = 100.0
NONRES_LOW = 0.01
NONRES_MODERATE = 0.15


def default_system(**overrides):
    return build_level_system(**overrides)


@dataclass(frozen=True)
class RamanScheme:
    """Which transitions pump, control and carry the Raman photon."""

    name: str
    pump: int
    control: int
    raman: int

    @property
    def prepared_state(self):
        # pumping empties the ground state the pump addresses
        g = TRANSITION_TABLE[self.pump][0]
        return DOWN if g == UP else UP


FORWARD = RamanScheme("forward", pump=4, control=2, raman=4)
REVERSE = RamanScheme("reverse", pump=1, control=3, raman=1)
SCHEMES = {"forward": FORWARD, "reverse": REVERSE}


def pump_intensity(ls, scheme=FORWARD, saturation=PUMP_SATURATION):
    return intensity_for_saturation(ls, scheme.pump, saturation)


def raman_sequence(ls, control, scheme=FORWARD, detuning=0.0, pump_duration=None,
                   period=None, gap=5.0, saturation=PUMP_SATURATION,
                   eom_rise_time=EOM_RISE_TIME, n_repeats=1):
    """Pump (square, from t=0) then ``control`` (an envelope spec mapping).

    ``control`` times are relative to the end of the pump plus ``gap``.
    Without ``pump_duration`` no pump is applied (the caller then starts
    from the prepared state).
    """
    spec = dict(control)
    start = 0.0 if pump_duration is None else pump_duration + gap
    pump = None
    if pump_duration is not None:
        pump = Pulse(make_envelope({"shape": "square", "start": 0.0,
                                    "duration": pump_duration,
                                    "peak_intensity": pump_intensity(ls, scheme, saturation)}),
                     scheme.pump, 0.0, 0.0)
    env = make_envelope(spec).shifted(start)
    ctl = Pulse(env, scheme.control, detuning, eom_rise_time)
    if period is None:
        period = ctl.support[1] + 10 * eom_rise_time + gap
    return build_sequence(pump, ctl, period, n_repeats)


# --- spin pumping and relaxation ------------------------------------------

def pumping_transient(ls=None, noise=NOISE, label=4, saturation=PUMP_SATURATION,
                      duration=400.0, nonres_intensity=NONRES_LOW, dt=0.01):
    """Population of the pumped-into state under a square pump; fit 1/e time."""
    ls = ls or default_system()
    I = intensity_for_saturation(ls, label, saturation)
    pump = Pulse(make_envelope({"shape": "square", "start": 0.0, "duration": duration,
                                "peak_intensity": I}), label)
    seq = build_sequence(pump, None, duration)
    r = evolve_master(thermal_ground_state(ls), seq, ls, noise, dt=dt,
                      save_every=int(round(0.5 / dt)), nonres_intensity=nonres_intensity)
    target = DOWN if TRANSITION_TABLE[label][0] == UP else UP
    pop = r.population(target)
    fit = fitkit.fit_exponential(r.times, pop)
    return r.times, pop, fit


def relaxation_transient(ls=None, noise=NOISE, duration=5000.0, dt=1.0,
                         nonres_intensity=0.0):
    """Undriven return of |up> to thermal equilibrium; fit 1/e time."""
    ls = ls or default_system()
    r = evolve_master(pure_state(UP), None, ls, noise, dt=dt, t_end=duration,
                      nonres_intensity=nonres_intensity)
    pop = r.population(UP)
    fit = fitkit.fit_exponential(r.times, pop)
    return r.times, pop, fit


def preparation(ls=None, noise=NOISE, nonres_intensity=NONRES_LOW,
                probe_intensity=PREP_PROBE_INTENSITY, saturation=PREP_SATURATION):
    ls = ls or default_system()
    return preparation_efficiency(ls, noise, pump_label=1, pump_saturation=saturation,
                                  probe_label=3, probe_intensity=probe_intensity,
                                  nonres_intensity=nonres_intensity)


# --- photon shaping --------------------------------------------------------

def raman_waveform(ls, noise, control, scheme=FORWARD, detuning=0.0,
                   nonres_intensity=NONRES_LOW, dt=0.01, save_every=10, **seq_kw):
    """Emission rate into the Raman channel after perfect preparation."""
    seq = raman_sequence(ls, control, scheme, detuning, **seq_kw)
    rho0 = pure_state(scheme.prepared_state)
    r = evolve_master(rho0, seq, ls, noise, dt=dt, save_every=save_every,
                      nonres_intensity=nonres_intensity)
    return r.times, emission_waveform(r, scheme.raman, ls), r


def square_control(intensity, duration):
    return {"shape": "square", "start": 0.0, "duration": duration,
            "peak_intensity": intensity}


def gaussian_control(intensity, fwhm):
    return {"shape": "gaussian", "center": 2.0 * fwhm, "fwhm": fwhm,
            "peak_intensity": intensity}


def raman_time(ls, noise, intensity, scheme=FORWARD, duration=None,
               nonres_intensity=NONRES_LOW):
    """Fitted decay time of the Raman waveform under a square control pulse."""
    if duration is None:
        duration = 6.0 * 14.0 / max(intensity, 1e-9)
    t, w, _ = raman_waveform(ls, noise, square_control(intensity, duration), scheme,
                             nonres_intensity=nonres_intensity, save_every=50)
    # skip the sub-ns turn-on
    m = (t >= 2.0) & (t <= duration)
    return fitkit.fit_exponential(t[m], w[m])


def waveform_fwhm(t, w):
    i = int(np.argmax(w))
    half = w[i] / 2
    above = np.flatnonzero(w >= half)
    lo, hi = above[0], above[-1]
    t_lo = np.interp(half, [w[lo - 1], w[lo]], [t[lo - 1], t[lo]])
    t_hi = np.interp(half, [w[hi + 1], w[hi]], [t[hi + 1], t[hi]])
    return float(t_hi - t_lo)


# --- HBT -------------------------------------------------------------------

def hbt_experiment(ls, noise, control, n_traj, seed, scheme=FORWARD, pump_duration=60.0,
                   period=100.0, gap=5.0, nonres_intensity=NONRES_LOW, n_repeats=20,
                   workers=1, bin_width=ps.FIGURE_BIN, gate=None, efficiency=1.0,
                   dark_rate=0.0, labels=None):
    """Gated clicks from all transitions (or only ``labels``), HBT and g2(0).

    Detection is colour-blind by default: photons scattered off-resonantly on
    the strong transitions during the gate are what fills the zero-delay peak.
    """
    seq = raman_sequence(ls, control, scheme, 0.0, pump_duration, period, gap,
                         n_repeats=n_repeats)
    rec = mcwf_run(seq, ls, noise, n_traj, seed, nonres_intensity=nonres_intensity,
                   workers=workers)
    if gate is None:
        gate = seq.control.support
    if labels is not None:
        rec = rec.select(labels=labels)
    rec = ps.detector_apply(rec, efficiency, dark_rate, gate, rng=seed)
    coinc = ps.hbt_correlate(rec, bin_width, rng=seed)
    g2 = ps.g2_zero(coinc, period)
    return rec, coinc, g2, ps.g2_zero_error(coinc, period)


# --- spectra ---------------------------------------------------------------

def raman_spectrum(ls, noise, control, scheme=REVERSE, detuning=0.0,
                   nonres_intensity=NONRES_MODERATE, grid_step=0.2, tail=10.0,
                   freqs=None, n_nodes=9, n_spin_nodes=5, max_grid=2000):
    """Photons per sequence per GHz versus detuning from the Raman channel line."""
    seq = raman_sequence(ls, control, scheme, detuning)
    rho0 = pure_state(scheme.prepared_state)
    t_end = seq.control.support[1] + tail
    n = int(round(t_end / grid_step)) + 1
    t_grid = grid_step * np.arange(n)
    _, G = two_time_correlation(seq, ls, noise, scheme.raman, t_grid, rho0,
                                nonres_intensity=nonres_intensity, n_nodes=n_nodes,
                                n_spin_nodes=n_spin_nodes, max_grid=max_grid)
    if freqs is None:
        freqs = np.linspace(-4, 4, 801)
    S = ls.transition(scheme.raman).decay_rate * g1_spectrum(t_grid, G, freqs)
    return freqs, S


def etalon_linewidth(freqs, S, etalon=ps.EtalonModel(), scan=None):
    """Deterministic etalon scan of S followed by the deconvolving Voigt fit."""
    if scan is None:
        scan = np.linspace(freqs[0] + 1, freqs[-1] - 1, 241)
    spec = ps.scan_spectrum(freqs, np.clip(S, 0, None), etalon, scan, integration_time=1.0,
                            poisson=False)
    return spec, fitkit.fit_voigt_deconvolved(spec, etalon_fwhm=etalon.linewidth)
