"""
Turn click records into what the bench measures: gated detector output,
arrival-time histograms, HBT coincidences, g2(0) and etalon-scanned spectra.
"""

from dataclasses import dataclass, field
import csv
import io
import json
import math

import numpy as np

from .dynamics.mcwf import ClickRecord

TCSPC_BIN = 0.512
FIGURE_BIN = 2.0
ETALON_ORDERS = 2
N_SIDE = 5


@dataclass
class Histogram:
    bin_width: float
    origin: float
    counts: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if not self.bin_width > 0:
            raise ValueError("bin_width must be > 0")
        if np.any(self.counts < 0):
            raise ValueError("counts must be >= 0")

    @property
    def edges(self):
        return self.origin + self.bin_width * np.arange(len(self.counts) + 1)

    @property
    def centers(self):
        return self.origin + self.bin_width * (np.arange(len(self.counts)) + 0.5)

    def rebin(self, factor):
        n = len(self.counts) // factor * factor
        c = self.counts[:n].reshape(-1, factor).sum(axis=1)
        return Histogram(self.bin_width * factor, self.origin, c, dict(self.meta))

    def __add__(self, other):
        if (self.bin_width, self.origin, len(self.counts)) != \
                (other.bin_width, other.origin, len(other.counts)):
            raise ValueError("histograms have different binning")
        meta = dict(self.meta)
        if "n_sequences" in meta and "n_sequences" in other.meta:
            meta["n_sequences"] = meta["n_sequences"] + other.meta["n_sequences"]
        return Histogram(self.bin_width, self.origin, self.counts + other.counts, meta)

    def to_csv(self):
        return _rows_to_csv(("bin_center", "counts"),
                            zip(self.centers.tolist(), self.counts.tolist()))

    def to_json(self):
        return json.dumps({"kind": "histogram", "bin_width": self.bin_width,
                           "origin": self.origin, "counts": self.counts.tolist(),
                           "meta": _plain(self.meta)})

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(d["bin_width"], d["origin"], np.array(d["counts"], dtype=np.int64), d["meta"])

    @classmethod
    def from_csv(cls, text, meta=None):
        x, c = _csv_columns(text)
        if len(x) < 2:
            raise ValueError("need at least two bins to recover the bin width")
        bw = (x[-1] - x[0]) / (len(x) - 1)
        return cls(bw, x[0] - bw / 2, np.rint(c).astype(np.int64), meta or {})


@dataclass(frozen=True)
class EtalonModel:
    fsr: float = 12.9
    linewidth: float = 0.25
    peak_transmission: float = 1.0

    def __post_init__(self):
        if not 0 < self.linewidth < self.fsr:
            raise ValueError("need 0 < linewidth < FSR")
        if not 0 < self.peak_transmission <= 1:
            raise ValueError("peak transmission must lie in (0, 1]")

    @property
    def finesse(self):
        return self.fsr / self.linewidth


@dataclass
class Spectrum:
    detunings: np.ndarray
    counts: np.ndarray
    integration_time: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.detunings = np.asarray(self.detunings, dtype=float)
        self.counts = np.asarray(self.counts, dtype=float)
        if self.detunings.shape != self.counts.shape:
            raise ValueError("detunings and counts must have the same length")
        if np.any(self.counts < 0):
            raise ValueError("counts must be >= 0")

    def to_csv(self):
        return _rows_to_csv(("detuning", "counts"),
                            zip(self.detunings.tolist(), self.counts.tolist()))

    def to_json(self):
        return json.dumps({"kind": "spectrum", "detunings": self.detunings.tolist(),
                           "counts": self.counts.tolist(),
                           "integration_time": self.integration_time,
                           "meta": _plain(self.meta)})

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(np.array(d["detunings"]), np.array(d["counts"]), d["integration_time"],
                   d["meta"])

    @classmethod
    def from_csv(cls, text, integration_time=1.0):
        x, c = _csv_columns(text)
        return cls(x, c, integration_time)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _rows_to_csv(header, rows):
    # repr() of a python float round-trips exactly
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(v) for v in row])
    return buf.getvalue()


def _csv_columns(text):
    rows = list(csv.reader(io.StringIO(text)))
    data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    if data.size == 0:
        return np.zeros(0), np.zeros(0)
    return data[:, 0], data[:, 1]


# --- detector ----------------------------------------------------------------

def detector_apply(clicks, efficiency=1.0, dark_rate=0.0, gate=None, rng=None):
    """Gate, thin and add dark counts.

    ``gate`` is a ``(start, stop)`` window in period-local time (default: the
    whole period).  Dark counts are labelled 0.
    """
    if not 0 < efficiency <= 1:
        raise ValueError("efficiency must lie in (0, 1]")
    if dark_rate < 0:
        raise ValueError("dark_rate must be >= 0")
    if gate is None:
        gate = (0.0, clicks.period)
    g0, g1 = float(gate[0]), float(gate[1])
    if not g1 > g0:
        raise ValueError("gate must have stop > start")
    if rng is None or isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(clicks.rng_seed if rng is None else rng)
    keep = (clicks.times >= g0) & (clicks.times < g1)
    if efficiency < 1:
        keep &= rng.random(len(clicks)) < efficiency
    t, lab, s = clicks.times[keep], clicks.labels[keep], clicks.sequence[keep]
    if dark_rate > 0:
        n_dark = rng.poisson(dark_rate * (g1 - g0) * clicks.n_sequences)
        t = np.concatenate([t, rng.uniform(g0, g1, n_dark)])
        lab = np.concatenate([lab, np.zeros(n_dark, dtype=int)])
        s = np.concatenate([s, rng.integers(0, clicks.n_sequences, n_dark)])
    meta = dict(clicks.meta)
    meta["gate"] = (g0, g1)
    out = ClickRecord(t, lab, s, clicks.n_sequences, clicks.period, clicks.rng_seed, meta)
    return out.sorted()


# --- histograms --------------------------------------------------------------

def bin_waveform(clicks, bin_width=TCSPC_BIN, window=None):
    """Arrival-time histogram of period-local times over the gate window."""
    if not bin_width > 0:
        raise ValueError("bin_width must be > 0")
    if window is None:
        window = clicks.meta.get("gate", (0.0, clicks.period))
    w0, w1 = float(window[0]), float(window[1])
    n = max(1, int(math.ceil((w1 - w0) / bin_width - 1e-9)))
    t = clicks.times[(clicks.times >= w0) & (clicks.times < w1)]
    idx = np.minimum(((t - w0) / bin_width).astype(np.int64), n - 1)
    counts = np.bincount(idx, minlength=n)
    return Histogram(bin_width, w0, counts,
                     {"n_sequences": clicks.n_sequences, "gate": (w0, w1)})


def hbt_correlate(clicks, bin_width=TCSPC_BIN, max_order=N_SIDE, rng=None):
    """Start-stop coincidences between two virtual detectors behind a 50/50 splitter.

    Every pair (event on A, event on B) with delay t_B - t_A inside
    +-(max_order + 0.5) periods is histogrammed.
    """
    if clicks.n_sequences < max_order + 1:
        raise ValueError(f"need clicks from at least {max_order + 1} sequences, "
                         f"got {clicks.n_sequences}")
    if rng is None or isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(clicks.rng_seed + 1 if rng is None else rng)
    P = clicks.period
    half = (max_order + 0.5) * P
    nb = int(math.ceil(half / bin_width))
    origin = -nb * bin_width
    counts = np.zeros(2 * nb, dtype=np.int64)
    t = np.sort(clicks.absolute_times)
    to_a = rng.random(len(t)) < 0.5
    ta, tb = t[to_a], t[~to_a]
    if len(ta) and len(tb):
        lo = np.searchsorted(tb, ta - half, side="left")
        hi = np.searchsorted(tb, ta + half, side="right")
        # expand pair ranges without a python loop over events
        n_pairs = hi - lo
        if n_pairs.sum():
            rep = np.repeat(np.arange(len(ta)), n_pairs)
            offs = np.arange(n_pairs.sum()) - np.repeat(np.cumsum(n_pairs) - n_pairs, n_pairs)
            d = tb[lo[rep] + offs] - ta[rep]
            d = d[(d >= -half) & (d <= half)]
            idx = np.clip(np.floor((d - origin) / bin_width).astype(np.int64), 0, 2 * nb - 1)
            counts = np.bincount(idx, minlength=2 * nb).astype(np.int64)
    return Histogram(bin_width, origin, counts,
                     {"n_sequences": clicks.n_sequences, "period": P, "max_order": max_order})


def peak_areas(coinc, period, n_side=N_SIDE):
    """Counts in one-period windows centered on k*period for k = -n_side..n_side."""
    c = coinc.centers
    half_span = -coinc.origin
    if half_span < (n_side + 0.5) * period - 1e-9 * period:
        raise ValueError(f"histogram does not contain {n_side} side peaks on each side")
    ks = np.arange(-n_side, n_side + 1)
    areas = np.array([coinc.counts[(c >= (k - 0.5) * period) & (c < (k + 0.5) * period)].sum()
                      for k in ks])
    return ks, areas


def g2_zero(coinc, period, n_side=N_SIDE):
    """Central-peak area over the mean area of the neighbouring peaks (k = +-1..+-n_side)."""
    ks, areas = peak_areas(coinc, period, n_side)
    side = areas[ks != 0]
    mean = side.mean()
    if mean == 0:
        raise ZeroDivisionError("side peaks are empty; g2(0) undefined")
    return float(areas[ks == 0][0] / mean)


def g2_zero_error(coinc, period, n_side=N_SIDE):
    """Poisson 1-sigma of the ratio."""
    ks, areas = peak_areas(coinc, period, n_side)
    side = areas[ks != 0].astype(float)
    c0 = float(areas[ks == 0][0])
    m = side.mean()
    if m == 0:
        raise ZeroDivisionError("side peaks are empty; g2(0) undefined")
    r = c0 / m
    var_m = side.sum() / len(side) ** 2
    return float(math.sqrt(c0 / m ** 2 + r ** 2 * var_m / m ** 2))


# --- etalon ------------------------------------------------------------------

def etalon_transmission(detuning, m=EtalonModel()):
    """Sum of lorentzians at detuning - k*FSR, |k| <= 2, normalized to the peak."""
    d = np.asarray(detuning, dtype=float)
    hw = 0.5 * m.linewidth
    ks = np.arange(-ETALON_ORDERS, ETALON_ORDERS + 1)
    prof = lambda x: np.sum(1.0 / (1.0 + ((x[..., None] - ks * m.fsr) / hw) ** 2), axis=-1)
    return m.peak_transmission * prof(d) / prof(np.zeros(1))[0]


def scan_spectrum(freqs, density, etalon=EtalonModel(), detunings=None,
                  integration_time=100.0, rate=1.0, rng=None, poisson=True):
    """Counts behind the scanned etalon.

    ``density`` is the intrinsic spectrum in photons per sequence per GHz on
    the uniform grid ``freqs``; ``rate`` converts photons per sequence into
    detected counts per second.  The expected counts are
    ``rate * integration_time * integral density(nu) T(D - nu) dnu``.
    """
    freqs = np.asarray(freqs, dtype=float)
    density = np.asarray(density, dtype=float)
    if detunings is None:
        detunings = freqs
    detunings = np.asarray(detunings, dtype=float)
    df = freqs[1] - freqs[0] if len(freqs) > 1 else 1.0
    T = etalon_transmission(detunings[:, None] - freqs[None, :], etalon)
    expected = rate * integration_time * (T @ density) * df
    expected = np.clip(expected, 0, None)
    if poisson:
        if rng is None or isinstance(rng, (int, np.integer)):
            rng = np.random.default_rng(0 if rng is None else rng)
        counts = rng.poisson(expected).astype(float)
    else:
        counts = expected
    return Spectrum(detunings, counts, integration_time,
                    {"etalon": {"fsr": etalon.fsr, "linewidth": etalon.linewidth,
                                "peak_transmission": etalon.peak_transmission},
                     "poisson": poisson})


# --- synthetic streams (estimator checks) -----------------------------------

def synthetic_stream(n_sequences, period, mean_photons, g2=1.0, width=5.0, seed=0,
                     poisson=False):
    """Click record with a prescribed zero-delay coincidence ratio.

    Sequences emit 0, 1 or 2 photons with p2 = g2*mu^2/2 and p1 = mu - 2*p2,
    so E[n(n-1)] / E[n]^2 = g2 exactly.  ``poisson=True`` draws Poissonian
    photon numbers instead (ratio 1).
    """
    rng = np.random.default_rng(seed)
    mu = float(mean_photons)
    if poisson:
        n = rng.poisson(mu, n_sequences)
    else:
        p2 = 0.5 * g2 * mu ** 2
        p1 = mu - 2 * p2
        if p1 < 0 or p1 + p2 > 1:
            raise ValueError("mean_photons too large for the requested g2")
        n = rng.choice(3, size=n_sequences, p=[1 - p1 - p2, p1, p2])
    seqs = np.repeat(np.arange(n_sequences, dtype=np.int64), n)
    times = 0.5 * period + width * rng.standard_normal(len(seqs))
    times = np.clip(times, 0, np.nextafter(period, 0))
    labels = np.full(len(seqs), 3)
    return ClickRecord(times, labels, seqs, n_sequences, period, seed).sorted()
