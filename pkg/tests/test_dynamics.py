import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ramanqd.levels import build_level_system, NoiseParams, boltzmann_ratio, UP, DOWN
from ramanqd.pulses import make_envelope, build_sequence, Pulse
from ramanqd.dynamics import (evolve_master, mcwf_run, thermal_ground_state, pure_state,
                              two_time_correlation, g1_spectrum, emission_waveform,
                              emitted_photons, rate_model, StepSizeError, JumpStepError,
                              cw_steady_state, preparation_efficiency)
from ramanqd.dynamics.cw import CWLaser, intensity_for_saturation
from ramanqd.dynamics.master import check_density_matrix
from ramanqd.dynamics.model import noise_realizations

LS = build_level_system()
QUIET = NoiseParams(gamma_flip_up_down=1 / 1.75)


def pump_seq(duration=20.0, s=2.0, label=4, period=None):
    I = intensity_for_saturation(LS, label, s)
    p = Pulse(make_envelope({"shape": "square", "start": 0, "duration": duration,
                             "peak_intensity": I}), label)
    return build_sequence(p, None, period or duration)


def test_undriven_relaxation_matches_rate_model():
    r = evolve_master(pure_state(UP), None, LS, QUIET, dt=2.0, t_end=10000.0)
    n_up, _ = rate_model(LS, QUIET, r.times, n_up0=1.0, nonres_intensity=0.0)
    assert np.abs(r.population(UP) - n_up).max() < 1e-9
    assert r.population(UP)[-1] / r.population(DOWN)[-1] == pytest.approx(
        boltzmann_ratio(LS), rel=1e-3)


def test_thermal_state_is_stationary():
    r = evolve_master(thermal_ground_state(LS), None, LS, QUIET, dt=5.0, t_end=500.0)
    assert np.abs(r.populations - r.populations[0]).max() < 1e-12


def test_trace_and_positivity_under_drive():
    noise = NoiseParams(sigma_charge_max=0.3, gamma_flip_up_down=0.5, T2_star_hole=2.0,
                        spin_charge_ratio=0.5)
    r = evolve_master(thermal_ground_state(LS), pump_seq(), LS, noise, save_every=10,
                      nonres_intensity=0.1, n_nodes=5, n_spin_nodes=3)
    tr = np.real(np.einsum("nii->n", r.rho))
    assert np.abs(tr - 1).max() < 1e-9
    assert np.linalg.eigvalsh(r.rho).min() > -1e-9


def test_pumping_empties_the_driven_state():
    r = evolve_master(thermal_ground_state(LS), pump_seq(400.0), LS, QUIET, save_every=100,
                      nonres_intensity=0.0)
    # residual set by relaxation and off-resonant scattering on 2
    assert r.population(UP)[-1] > 0.95


def test_step_size_guard():
    with pytest.raises(StepSizeError) as e:
        evolve_master(thermal_ground_state(LS), pump_seq(), LS, QUIET, dt=0.1)
    assert e.value.required == pytest.approx(0.01)


def test_rk4_agrees_with_exponential_integrator():
    # piecewise-constant drive against a continuous one: second order in dt
    spec = {"shape": "gaussian", "center": 10, "fwhm": 3, "peak_intensity": 50.0}
    seq = build_sequence(Pulse(make_envelope(spec), 4), None, 25.0)
    a = evolve_master(thermal_ground_state(LS), seq, LS, QUIET, save_every=100)
    b = evolve_master(thermal_ground_state(LS), seq, LS, QUIET, save_every=100,
                      method="rk4", check=False)
    assert np.abs(a.rho - b.rho).max() < 1e-4


def test_density_matrix_checks():
    with pytest.raises(ValueError):
        check_density_matrix(np.eye(4))
    bad = pure_state(UP)
    bad[0, 1] = 0.3
    with pytest.raises(ValueError):
        check_density_matrix(bad)


def test_mcwf_matches_master_equation():
    seq = pump_seq(20.0)
    n = 2000
    rec = mcwf_run(seq, LS, QUIET, n, seed=11, population_stride=100, nonres_intensity=0.0)
    me = evolve_master(thermal_ground_state(LS), seq, LS, QUIET, save_every=100,
                       nonres_intensity=0.0)
    p_mc = rec.meta["populations"][-1, UP]
    p_me = me.population(UP)[-1]
    sigma = np.sqrt(p_me * (1 - p_me) / n)
    assert abs(p_mc - p_me) < 3 * sigma
    # photon count: mean clicks per sequence against integrated emission
    rate = sum(emitted_photons(me.times, emission_waveform(me, k, LS)) for k in (1, 2, 3, 4))
    clicks = len(rec) / rec.n_sequences
    err = np.sqrt(rec.counts_per_sequence().var() / n)
    assert abs(clicks - rate) < 3 * err + 1e-3


def test_mcwf_deterministic_and_worker_independent():
    seq = pump_seq(5.0)
    a = mcwf_run(seq, LS, QUIET, 40, seed=5, shard_size=10)
    b = mcwf_run(seq, LS, QUIET, 40, seed=5, shard_size=10, workers=2)
    c = mcwf_run(seq, LS, QUIET, 40, seed=6, shard_size=10)
    for f in ("times", "labels", "sequence"):
        assert np.array_equal(getattr(a, f), getattr(b, f))
    assert not np.array_equal(a.times, c.times) or len(a) != len(c)


def test_mcwf_jump_step_guard():
    fast = build_level_system(Gamma=30.0)
    I = intensity_for_saturation(fast, 4, 2.0)
    p = Pulse(make_envelope({"shape": "square", "start": 0, "duration": 5,
                             "peak_intensity": I}), 4)
    with pytest.raises(JumpStepError):
        mcwf_run(build_sequence(p, None, 5.0), fast, QUIET, 2, seed=0, dt=0.01)


def test_noise_quadrature_moments():
    noise = NoiseParams(sigma_charge_max=0.4, I_sat_nr=0.05, spin_charge_ratio=0.5,
                        spin_charge_correlation=-0.4)
    pairs, w = noise_realizations(LS, noise, 0.05, 9, 5)
    assert w.sum() == pytest.approx(1)
    so, ss = 0.2, 0.1
    cov = np.einsum("k,ki,kj->ij", w, pairs, pairs)
    assert cov[0, 0] == pytest.approx(so ** 2)
    assert cov[1, 1] == pytest.approx(ss ** 2)
    assert cov[0, 1] / (so * ss) == pytest.approx(-0.4)


def test_spectrum_integrates_to_emitted_photons():
    # Parseval: the spectrum over the full Nyquist band equals the photon number
    spec = {"shape": "gaussian", "center": 10, "fwhm": 5, "peak_intensity": 1.0}
    seq = build_sequence(None, Pulse(make_envelope(spec), 2), 25.0)
    rho0 = pure_state(UP)
    me = evolve_master(rho0, seq, LS, QUIET, save_every=20, nonres_intensity=0.0)
    photons = emitted_photons(me.times, emission_waveform(me, 4, LS))
    t = 0.2 * np.arange(126)
    _, G = two_time_correlation(seq, LS, QUIET, 4, t, rho0, nonres_intensity=0.0)
    assert np.abs(G - G.conj().T).max() < 1e-12
    f = np.linspace(-2.5, 2.5, 2001)[:-1]
    S = LS.transition(4).decay_rate * g1_spectrum(t, G, f)
    assert np.sum(S) * (f[1] - f[0]) == pytest.approx(photons, rel=0.02)


def test_cw_steady_state_physical():
    I = intensity_for_saturation(LS, 1, 1.0)
    rho = cw_steady_state(LS, QUIET, [CWLaser(LS.frequency(1), I)], nonres_intensity=0.0)
    assert np.trace(rho).real == pytest.approx(1)
    assert np.linalg.eigvalsh(rho).min() > -1e-10
    # a single laser on 1 pumps the spin down almost completely
    assert rho[DOWN, DOWN].real > 0.95


def test_preparation_efficiency_bounded():
    eff = preparation_efficiency(LS, QUIET, pump_saturation=4.0, probe_intensity=100.0,
                                 nonres_intensity=0.0)
    assert 0.9 < eff < 1.0


@settings(max_examples=10, deadline=None)
@given(s=st.floats(0.1, 20.0), det=st.floats(-2, 2))
def test_cw_trace_property(s, det):
    I = intensity_for_saturation(LS, 4, s)
    rho = cw_steady_state(LS, QUIET, [CWLaser(LS.frequency(4) + det, I)], nonres_intensity=0.0)
    assert np.trace(rho).real == pytest.approx(1, abs=1e-9)
    assert np.linalg.eigvalsh(rho).min() > -1e-9
