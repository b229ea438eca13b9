import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ramanqd import photostream as ps
from ramanqd.dynamics.mcwf import ClickRecord


def record(times, seqs, n, period=100.0):
    return ClickRecord(np.array(times, float), np.full(len(times), 4), np.array(seqs), n,
                       period).sorted()


def test_histogram_roundtrips_exactly():
    h = ps.Histogram(0.512, -3.1, np.array([0, 4, 7, 1]), {"n_sequences": 9})
    assert ps.Histogram.from_json(h.to_json()).to_json() == h.to_json()
    back = ps.Histogram.from_csv(h.to_csv())
    assert np.array_equal(back.counts, h.counts)
    # CSV stores bin centres, so the width is recovered to rounding only
    assert back.bin_width == pytest.approx(h.bin_width, rel=1e-12)
    assert back.origin == pytest.approx(h.origin, rel=1e-12)


def test_histogram_add_and_rebin():
    h = ps.Histogram(1.0, 0.0, np.arange(6))
    assert (h + h).counts.tolist() == [0, 2, 4, 6, 8, 10]
    assert h.rebin(2).counts.tolist() == [1, 5, 9]
    with pytest.raises(ValueError):
        h + ps.Histogram(2.0, 0.0, np.arange(6))


def test_detector_gate_and_efficiency():
    r = record([1, 10, 50, 99], [0, 0, 1, 2], 3)
    g = ps.detector_apply(r, gate=(5, 60))
    assert g.times.tolist() == [10, 50]
    assert g.meta["gate"] == (5.0, 60.0)
    big = record(np.full(20000, 30.0), np.arange(20000), 20000)
    kept = ps.detector_apply(big, efficiency=0.3, rng=1)
    assert len(kept) / 20000 == pytest.approx(0.3, abs=0.015)
    with pytest.raises(ValueError):
        ps.detector_apply(r, efficiency=0)


def test_dark_counts_rate():
    r = record([], [], 10000)
    d = ps.detector_apply(r, dark_rate=1e-3, gate=(0, 50), rng=3)
    assert len(d) == pytest.approx(1e-3 * 50 * 10000, rel=0.1)
    assert set(d.labels.tolist()) == {0}


def test_bin_waveform_counts_everything():
    r = record([0.1, 0.6, 0.7, 99.9], [0, 0, 1, 1], 2)
    h = ps.bin_waveform(r, 0.512, (0, 100))
    assert h.counts.sum() == 4
    assert h.counts[0] == 1 and h.counts[1] == 2


def test_hbt_needs_enough_sequences():
    with pytest.raises(ValueError):
        ps.hbt_correlate(record([1.0], [0], 3))


def test_g2_on_synthetic_streams():
    stream = ps.synthetic_stream(300000, 100.0, 0.3, g2=0.12, seed=4)
    c = ps.hbt_correlate(stream, ps.FIGURE_BIN, rng=4)
    g, err = ps.g2_zero(c, 100.0), ps.g2_zero_error(c, 100.0)
    assert abs(g - 0.12) < max(0.02, 3 * err)
    ideal = ps.hbt_correlate(ps.synthetic_stream(20000, 100.0, 0.3, g2=0.0, seed=1), rng=1)
    assert ps.g2_zero(ideal, 100.0) == 0.0
    pois = ps.synthetic_stream(100000, 100.0, 0.3, poisson=True, seed=2)
    c = ps.hbt_correlate(pois, rng=2)
    assert abs(ps.g2_zero(c, 100.0) - 1) < 3 * ps.g2_zero_error(c, 100.0)


def test_g2_empty_side_peaks():
    c = ps.Histogram(2.0, -550.0, np.zeros(550, dtype=np.int64))
    with pytest.raises(ZeroDivisionError):
        ps.g2_zero(c, 100.0)


def test_etalon_profile():
    m = ps.EtalonModel(12.9, 0.25)
    assert m.finesse == pytest.approx(51.6)
    assert ps.etalon_transmission(0.0, m) == pytest.approx(1.0)
    # half transmission at half the linewidth (neighbouring orders add a little)
    assert ps.etalon_transmission(0.125, m) == pytest.approx(0.5, abs=0.002)
    x = np.linspace(-2, 2, 41)
    assert np.allclose(ps.etalon_transmission(x, m), ps.etalon_transmission(x + 12.9, m),
                       atol=1e-3)


def test_delta_input_reproduces_etalon():
    f = np.linspace(-5, 5, 2001)
    dens = np.zeros_like(f)
    dens[1000] = 1 / (f[1] - f[0])  # one photon at zero detuning
    scan = np.linspace(-2, 2, 81)
    s = ps.scan_spectrum(f, dens, ps.EtalonModel(), scan, integration_time=1.0, poisson=False)
    assert np.allclose(s.counts, ps.etalon_transmission(scan), atol=1e-12)


def test_spectrum_roundtrip():
    s = ps.Spectrum(np.array([0.1, 0.2]), np.array([3.0, 4.5]), 10.0, {"a": 1})
    b = ps.Spectrum.from_json(s.to_json())
    assert b.to_json() == s.to_json()
    c = ps.Spectrum.from_csv(s.to_csv(), 10.0)
    assert np.array_equal(c.counts, s.counts)


@settings(max_examples=20, deadline=None)
@given(n=st.integers(10, 300), seed=st.integers(0, 2 ** 32))
def test_hbt_pair_count_invariant(n, seed):
    # every A/B pair within the window is counted exactly once
    rng = np.random.default_rng(seed)
    k = rng.poisson(1.0, n)
    seqs = np.repeat(np.arange(n), k)
    r = record(rng.uniform(0, 100, len(seqs)), seqs, n)
    c = ps.hbt_correlate(r, 2.0, max_order=2, rng=seed)
    t = r.absolute_times
    to_a = np.random.default_rng(seed).random(len(t)) < 0.5
    ta, tb = np.sort(t)[to_a], np.sort(t)[~to_a]
    d = tb[None, :] - ta[:, None]
    assert c.counts.sum() == np.count_nonzero(np.abs(d) <= 250.0)
