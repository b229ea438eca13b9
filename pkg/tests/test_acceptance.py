"""The eleven acceptance criteria, each at its stated tolerance.

Every test records a one-line detail through ``report`` before asserting so
that the terminal summary shows one PASS/FAIL line per criterion.  The
figure-scale runs take tens of minutes in total on one core.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ramanqd import fitkit
from ramanqd import photostream as ps
from ramanqd.config import loads
from ramanqd.dynamics import evolve_master, mcwf_run, thermal_ground_state
from ramanqd.dynamics.cw import intensity_for_saturation
from ramanqd.levels import NoiseParams, build_level_system, UP
from ramanqd.protocols import (NOISE, PUMP_SATURATION, REVERSE, default_system,
                               gaussian_control, hbt_experiment, pumping_transient, preparation,
                               raman_sequence, raman_spectrum, relaxation_transient,
                               square_control, waveform_fwhm)
from ramanqd.pulses import Pulse, build_sequence, make_envelope
from ramanqd.reproduce import FIGURES, load_figure
from ramanqd.runner import execute, run_scenario

pytestmark = pytest.mark.slow


def rel_err(x, target):
    return abs(x / target - 1)


@pytest.fixture(scope="module")
def figure():
    cache = {}

    def get(fig):
        # 4a, 4b and 4c share one scenario
        key = FIGURES[fig]
        if key not in cache:
            cache[key] = execute(load_figure(fig))[1]
        return cache[key]
    return get


def test_01_zeeman_splitting(report):
    ls = build_level_system(g_e=-0.05, g_h=0.41, B=2.8)
    split = ls.frequency(4) - ls.frequency(1)
    report(f"spin-preserving splitting {split:.3f} GHz (18.0 +- 0.2)")
    assert abs(split - 18.0) <= 0.2


def test_02_spin_pumping_time(report):
    ls = default_system(Gamma=1 / 0.33, branching=1 / 75)
    _, _, fit = pumping_transient(ls, NOISE, 4, PUMP_SATURATION, 400.0)
    tau = fit["tau"]
    report(f"tau = {tau:.2f} ns (50 +- 20%)")
    assert fit.converged and rel_err(tau, 50.0) <= 0.2


def test_03_spin_relaxation_time(report):
    _, _, fit = relaxation_transient(default_system(), NOISE, 5000.0, 1.0, nonres_intensity=0.0)
    tau = fit["tau"]
    report(f"tau = {tau:.1f} ns (950 +- 5%)")
    assert fit.converged and rel_err(tau, 950.0) <= 0.05


def test_04_preparation_efficiency(report):
    eff = preparation()
    report(f"efficiency {eff:.4f} (>= 0.95)")
    assert eff >= 0.95


def test_05_exponential_shaping(report, figure):
    s = figure("3a")
    I = np.array([it["value"] for it in s["items"]])
    decade = (I <= 1.0) & (I >= 0.1)
    corr = np.array(s["corrected_tau_times_intensity"])[decade]
    raw = np.array(s["tau_times_intensity"])[decade]
    spread = corr.max() / corr.min() - 1
    raw_spread = raw.max() / raw.min() - 1
    report(f"tau_R*I spread over 1..0.1 {spread:.2%} after removing the background "
           f"spin-flip rate (raw fitted decay {raw_spread:.1%}); "
           f"range {s['tau_min']:.1f}-{s['tau_max']:.1f} ns (14-245 +- 10%)")
    assert spread <= 0.05
    assert rel_err(s["tau_min"], 14.0) <= 0.1 and rel_err(s["tau_max"], 245.0) <= 0.1


def test_06_gaussian_shaping(report, figure):
    s = figure("3b")
    got = [it["fwhm"] for it in s["items"]]
    targets = [it["value"] for it in s["items"]]
    report("FWHM " + ", ".join(f"{g:.2f}/{t:g}" for g, t in zip(got, targets)) + " ns (+-10%)")
    assert targets == [5.0, 15.0, 23.0, 64.0]
    assert all(rel_err(g, t) <= 0.1 for g, t in zip(got, targets))


def test_07_g2_estimator(report, figure):
    c = ps.hbt_correlate(ps.synthetic_stream(1_000_000, 100.0, 0.3, g2=0.12, seed=1), rng=1)
    g_syn = ps.g2_zero(c, 100.0)
    p = ps.hbt_correlate(ps.synthetic_stream(200_000, 100.0, 0.3, poisson=True, seed=2), rng=2)
    g_poi, e_poi = ps.g2_zero(p, 100.0), ps.g2_zero_error(p, 100.0)
    i = ps.hbt_correlate(ps.synthetic_stream(100_000, 100.0, 0.3, g2=0.0, seed=3), rng=3)
    g_ideal = ps.g2_zero(i, 100.0)
    s = figure("3d")
    g_full = s["g2_zero"]
    report(f"synthetic {g_syn:.4f} (0.12 +- 0.01); poisson {g_poi:.3f} +- {e_poi:.3f}; "
           f"ideal {g_ideal:g}; full physics {g_full:.3f} +- {s['g2_zero_error']:.3f} "
           f"(in [0.05, 0.35])")
    assert abs(g_syn - 0.12) <= 0.01
    assert abs(g_poi - 1.0) <= 3 * e_poi
    assert g_ideal == 0.0
    assert 0.05 <= g_full <= 0.35

    # leakage strength is not pinned down, so the band must hold across it
    ls = default_system()
    seen = []

    @settings(max_examples=4, deadline=None, derandomize=True, database=None)
    @given(nonres=st.floats(0.003, 0.03), fwhm=st.floats(3.0, 8.0))
    def in_band(nonres, fwhm):
        g = hbt_experiment(ls, NOISE, gaussian_control(1.0, fwhm), 600, 5,
                           nonres_intensity=nonres)[2]
        seen.append(f"{g:.3f}@({nonres:.3g},{fwhm:.2g}ns)")
        assert 0.05 <= g <= 0.35

    try:
        in_band()
    finally:
        report("leakage sweep " + ", ".join(seen))


def test_08_spectral_shift(report, figure):
    s = figure("4b")
    fits = [f for f in s["fits"] if abs(f["detuning_L"]) <= 1.0 + 1e-9]
    x = np.array([f["detuning_L"] for f in fits])
    y = np.array([f["center"] for f in fits])
    slope = fitkit.fit_linear(x, y)["slope"]
    report(f"centroid slope {slope:.4f} over {x.min():g}..{x.max():g} GHz (1.00 +- 0.05)")
    assert x.min() <= -1.0 and x.max() >= 1.0
    assert abs(slope - 1.0) <= 0.05


def test_09_fourier_limit(report):
    ls = default_system()
    quiet = NoiseParams(gamma_flip_up_down=NOISE.gamma_flip_up_down)
    f = np.linspace(-0.05, 0.05, 2001)
    f, S = raman_spectrum(ls, quiet, gaussian_control(0.05, 50.0), REVERSE, 0.0,
                          nonres_intensity=0.0, grid_step=0.5, tail=20.0, freqs=f,
                          n_nodes=1, n_spin_nodes=1)
    fwhm = waveform_fwhm(f, S) * 1e3
    report(f"spectral FWHM {fwhm:.2f} MHz (8.8 +- 20%)")
    assert rel_err(fwhm, 8.8) <= 0.2


def test_10_broadening_laws(report, figure):
    d, e = figure("4d"), figure("4e")
    report(f"control sweep R2 {d['r2']:.4f} (> 0.95); minimum linewidth "
           f"{d['fwhm_at_lowest'] * 1e3:.1f} MHz (200 +- 10%); nonresonant max/min "
           f"{e['max_over_min']:.3f} (2 +- 0.3)")
    assert d["r2"] > 0.95
    assert rel_err(d["fwhm_at_lowest"], 0.200) <= 0.1
    assert abs(e["max_over_min"] - 2.0) <= 0.3


RELAX = """\
[scenario]
name = relax
experiment = spin_relaxation
seed = 11

[experiment]
duration = 3000.0
step = 25.0
"""

HBT = """\
[scenario]
name = hbt_small
experiment = hbt
seed = 12

[sequence]
scheme = forward
control_shape = gaussian
control_fwhm = 5.0
control_intensity = 1.0
n_repeats = 3

[experiment]
n_traj = 40
"""


def _same_bytes(scn, tmp_path, tag):
    a = run_scenario(scn, tmp_path / f"{tag}_a")
    b = run_scenario(scn, tmp_path / f"{tag}_b", workers=2)
    names = sorted(p.name for p in a.out_dir.iterdir())
    return names == sorted(p.name for p in b.out_dir.iterdir()) and all(
        (a.out_dir / n).read_bytes() == (b.out_dir / n).read_bytes() for n in names)


def test_11_numerical_invariants(report, tmp_path):
    ls = default_system()
    # trace and positivity along a full Raman sequence with calibrated noise
    seq = raman_sequence(ls, gaussian_control(1.0, 5.0))
    r = evolve_master(thermal_ground_state(ls), seq, ls, NOISE, save_every=10)
    drift = np.abs(np.real(np.einsum("nii->n", r.rho)) - 1).max()
    min_eig = np.linalg.eigvalsh(r.rho).min()

    # trajectories against the density matrix at 10^4 samples
    I = intensity_for_saturation(ls, 4, 2.0)
    pump = build_sequence(Pulse(make_envelope(square_control(I, 20.0)), 4), None, 20.0)
    n = 10_000
    rec = mcwf_run(pump, ls, NOISE, n, seed=2024, population_stride=100)
    me = evolve_master(thermal_ground_state(ls), pump, ls, NOISE, save_every=100)
    p_me = me.population(UP)[-1]
    p_mc = rec.meta["populations"][-1, UP]
    sigma = np.sqrt(p_me * (1 - p_me) / n)
    z = abs(p_mc - p_me) / sigma

    # fitters on noiseless data
    t = np.linspace(0, 400, 200)
    x = np.linspace(-3, 3, 301)
    s = np.linspace(0, 10, 50)
    cases = [
        (fitkit.fit_exponential(t, fitkit.exponential(t, 1.3, 55.0, 0.2)),
         {"amplitude": 1.3, "tau": 55.0, "offset": 0.2}),
        (fitkit.fit_lorentzian(x, fitkit.lorentzian(x, 0.1, 0.5, 2.0, 0.05)),
         {"center": 0.1, "fwhm": 0.5, "amplitude": 2.0, "offset": 0.05}),
        (fitkit.fit_voigt(x, fitkit.voigt(x, -0.2, 0.35, 0.25, 1.0, 0.02)),
         {"center": -0.2, "gaussian_fwhm": 0.35, "lorentzian_fwhm": 0.25, "amplitude": 1.0,
          "offset": 0.02}),
        (fitkit.fit_linear(s, 8.2 * s + 199.0), {"slope": 8.2, "intercept": 199.0}),
        (fitkit.fit_saturation(s, fitkit.saturation(s, 2.0, 1.5, 0.3)),
         {"amplitude": 2.0, "x_sat": 1.5, "offset": 0.3}),
    ]
    worst = max(abs(res.params[k] / v - 1) for res, truth in cases for k, v in truth.items())

    same = _same_bytes(loads(RELAX), tmp_path, "relax") and _same_bytes(loads(HBT), tmp_path,
                                                                         "hbt")
    report(f"trace drift {drift:.1e}; min eigenvalue {min_eig:.1e}; MCWF-ME "
           f"{z:.2f} sigma at 1e4 trajectories; worst fit error {worst:.1e}; "
           f"reruns byte-identical {same}")
    assert drift <= 1e-9 and min_eig >= -1e-9
    assert z <= 3
    assert worst <= 1e-3
    assert same
