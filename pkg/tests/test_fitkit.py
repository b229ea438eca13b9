import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import curve_fit

from ramanqd import fitkit as fk
from ramanqd.photostream import EtalonModel, scan_spectrum


def close(res, truth, rel=1e-3):
    for k, v in truth.items():
        assert res.params[k] == pytest.approx(v, rel=rel, abs=1e-9), k


def test_exponential_noiseless():
    t = np.linspace(0, 300, 200)
    r = fk.fit_exponential(t, fk.exponential(t, 2.0, 50.0, 0.3))
    assert r.converged and not r.flags
    close(r, {"amplitude": 2.0, "tau": 50.0, "offset": 0.3})
    assert r.r2 == pytest.approx(1.0)


def test_lorentzian_noiseless():
    x = np.linspace(-3, 3, 301)
    r = fk.fit_lorentzian(x, fk.lorentzian(x, 0.2, 0.4, 5.0, 0.1))
    close(r, {"center": 0.2, "fwhm": 0.4, "amplitude": 5.0, "offset": 0.1})


def test_voigt_noiseless():
    x = np.linspace(-2, 2, 401)
    y = fk.voigt(x, 0.05, 0.3, 0.2, 1.5, 0.01)
    r = fk.fit_voigt(x, y)
    close(r, {"center": 0.05, "gaussian_fwhm": 0.3, "lorentzian_fwhm": 0.2, "amplitude": 1.5,
              "offset": 0.01})


def test_voigt_is_normalized_and_limits():
    x = np.linspace(-400, 400, 400001)
    v = fk.voigt(x, 0, 0.3, 0.2, 1.0)
    assert np.sum(v) * (x[1] - x[0]) == pytest.approx(1.0, abs=1e-3)
    assert fk.voigt_fwhm(1.0, 0.0) == pytest.approx(1.0)
    assert fk.voigt_fwhm(0.0, 1.0) == pytest.approx(1.0, rel=3e-4)


def test_linear_and_saturation_noiseless():
    x = np.linspace(0.25, 8, 6)
    close(fk.fit_linear(x, 8.2 * x + 200), {"slope": 8.2, "intercept": 200})
    s = np.linspace(0, 10, 40)
    r = fk.fit_saturation(s, fk.saturation(s, 3.0, 0.8, 0.2))
    close(r, {"amplitude": 3.0, "x_sat": 0.8, "offset": 0.2})


def test_agrees_with_scipy_on_noisy_data():
    rng = np.random.default_rng(0)
    t = np.linspace(0, 300, 150)
    y = fk.exponential(t, 1.0, 60.0, 0.1) + rng.normal(0, 0.02, t.size)
    r = fk.fit_exponential(t, y)
    p, cov = curve_fit(lambda t, a, tau, c: fk.exponential(t, a, tau, c), t, y, p0=[1, 50, 0])
    assert r["tau"] == pytest.approx(p[1], rel=1e-6)
    assert r.errors["tau"] == pytest.approx(np.sqrt(cov[1, 1]), rel=1e-3)


def test_cost_history_non_increasing():
    rng = np.random.default_rng(1)
    x = np.linspace(-3, 3, 120)
    y = fk.voigt(x, 0.3, 0.4, 0.3, 1.0) + rng.normal(0, 0.01, x.size)
    r = fk.fit_voigt(x, y, p0=[-0.5, 1.0, 1.0, 0.5, 0.0])
    h = np.array(r.cost_history)
    assert len(h) > 2 and np.all(np.diff(h) <= 0)


def test_deconvolution_recovers_source_width():
    # a gaussian-broadened lorentzian line scanned through the etalon
    f = np.linspace(-20, 20, 40001)
    src = fk.voigt(f, 0.0, 0.2, 0.05, 1.0)
    scan = np.linspace(-1.5, 1.5, 121)
    spec = scan_spectrum(f, src, EtalonModel(linewidth=0.25), scan, integration_time=1.0,
                         poisson=False)
    r = fk.fit_voigt_deconvolved(spec, etalon_fwhm=0.25)
    assert r["lorentzian_deconvolved"] == pytest.approx(0.05, rel=0.02)
    assert r["fwhm_deconvolved"] == pytest.approx(fk.voigt_fwhm(0.2, 0.05), rel=0.02)


def test_deconvolution_clamps_and_flags():
    x = np.linspace(-2, 2, 201)
    with warnings.catch_warnings(record=True):
        warnings.simplefilter("always")
        r = fk.fit_voigt_deconvolved(x, fk.voigt(x, 0, 0.4, 0.1, 1.0), etalon_fwhm=0.25)
    assert r["lorentzian_deconvolved"] == 0.0
    assert r.flags and not r.reliable


def test_flags_for_unidentifiable_fits():
    t = np.linspace(0, 100, 50)
    r = fk.fit_exponential(t, np.full(t.size, 0.4))
    assert r.flags and not r.converged
    x = np.linspace(0, 1, 20)
    s = fk.fit_saturation(x, 0.5 * x)
    assert any("upper bound" in f for f in s.flags)


def test_input_validation():
    with pytest.raises(ValueError):
        fk.fit_lorentzian([1, 2, 3], [1, 2, 3])
    with pytest.raises(ValueError):
        fk.fit_linear([1, 1, 1], [1, 2, 3])
    with pytest.raises(ValueError):
        fk.fit_exponential(np.arange(5.0), np.ones(5), weights=-np.ones(5))


def test_result_json_roundtrip():
    x = np.linspace(-3, 3, 60)
    r = fk.fit_lorentzian(x, fk.lorentzian(x, 0, 1, 1, 0))
    back = fk.FitResult.from_json(r.to_json())
    assert back.params == r.params and back.converged == r.converged


@settings(max_examples=25, deadline=None)
@given(tau=st.floats(5, 200), amp=st.floats(0.1, 10), off=st.floats(-1, 1))
def test_exponential_recovery_property(tau, amp, off):
    t = np.linspace(0, 5 * tau, 120)
    r = fk.fit_exponential(t, fk.exponential(t, amp, tau, off))
    assert r["tau"] == pytest.approx(tau, rel=1e-3)


@settings(max_examples=25, deadline=None)
@given(c=st.floats(-0.5, 0.5), fg=st.floats(0.05, 0.6), fl=st.floats(0.05, 0.6))
def test_voigt_recovery_property(c, fg, fl):
    x = np.linspace(-3, 3, 241)
    r = fk.fit_voigt(x, fk.voigt(x, c, fg, fl, 1.0))
    assert r["center"] == pytest.approx(c, abs=1e-4)
    assert fk.voigt_fwhm(r["gaussian_fwhm"], r["lorentzian_fwhm"]) == pytest.approx(
        fk.voigt_fwhm(fg, fl), rel=1e-3)
