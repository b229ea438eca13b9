"""
Drive envelopes and two-color pump/control sequences.

Envelopes describe the *intensity* profile of a laser pulse, normalized to a
peak of one and scaled by ``peak_intensity`` (nW/um^2).  The field (Rabi)
amplitude follows the square root of the intensity.
"""

from dataclasses import dataclass, field, replace
import math

import numpy as np

from .levels import ValidationError

FOUR_LN2 = 4.0 * math.log(2.0)
DEFAULT_STEP = 0.01  # ns
EOM_RISE_TIME = 0.2  # ns, 10-90 %
GAUSSIAN_SUPPORT = 2.0  # half-width of the gaussian support, in FWHM

# Rabi frequency (GHz) per sqrt(nW/um^2) on a spin-preserving transition.
# Fixed once so that a weak square control on a spin-flipping transition gives
# tau_R = 14 ns at 1 nW/um^2; 245 ns is reached near 0.042 nW/um^2.
RABI_CALIB = 0.2320


class SchedulingError(ValueError):
    """Pulses overlap or do not fit inside the sequence period."""

    def __init__(self, message, interval=None):
        self.interval = interval
        super().__init__(message)


class SamplingError(ValueError):
    pass


SHAPES = ("square", "gaussian", "double_gaussian", "samples")


@dataclass(frozen=True)
class Envelope:
    """Normalized intensity envelope.

    ``params`` depends on ``shape``:

    * square: ``start``, ``duration``
    * gaussian: ``center``, ``fwhm``
    * double_gaussian: ``center1``, ``center2``, ``fwhm``, ``ratio``
    * samples: ``start``, ``step`` and the amplitude array ``values``
    """

    shape: str
    params: dict
    peak_intensity: float = 1.0
    values: np.ndarray = field(default=None, repr=False, compare=False)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        p = self.params
        if self.shape == "square":
            a = ((t >= p["start"]) & (t < p["start"] + p["duration"])).astype(float)
        elif self.shape == "gaussian":
            a = np.exp(-FOUR_LN2 * (t - p["center"]) ** 2 / p["fwhm"] ** 2)
        elif self.shape == "double_gaussian":
            a = _double_gaussian(t, p) / p["norm"]
        else:
            x = (t - p["start"]) / p["step"]
            a = np.interp(x, np.arange(len(self.values)), self.values, left=0.0, right=0.0)
        lo, hi = self.support
        return np.where((t >= lo) & (t <= hi), a, 0.0)

    def intensity(self, t):
        return self.peak_intensity * self(t)

    @property
    def support(self):
        p = self.params
        if self.shape == "square":
            return p["start"], p["start"] + p["duration"]
        if self.shape == "gaussian":
            w = GAUSSIAN_SUPPORT * p["fwhm"]
            return p["center"] - w, p["center"] + w
        if self.shape == "double_gaussian":
            w = GAUSSIAN_SUPPORT * p["fwhm"]
            return min(p["center1"], p["center2"]) - w, max(p["center1"], p["center2"]) + w
        return p["start"], p["start"] + p["step"] * (len(self.values) - 1)

    def shifted(self, dt):
        p = dict(self.params)
        for k in ("start", "center", "center1", "center2"):
            if k in p:
                p[k] += dt
        return replace(self, params=p)

    def to_spec(self):
        d = {"shape": self.shape, "peak_intensity": self.peak_intensity}
        d.update({k: v for k, v in self.params.items() if k != "norm"})
        return d


def _double_gaussian(t, p):
    g1 = np.exp(-FOUR_LN2 * (t - p["center1"]) ** 2 / p["fwhm"] ** 2)
    g2 = np.exp(-FOUR_LN2 * (t - p["center2"]) ** 2 / p["fwhm"] ** 2)
    return g1 + p["ratio"] * g2


def _positive(spec, key):
    v = float(spec[key])
    if not v > 0:
        raise ValidationError(key, v, "must be > 0")
    return v


def make_envelope(spec):
    """Build an Envelope from a mapping with a ``shape`` key.

    >>> env = make_envelope({"shape": "gaussian", "center": 10, "fwhm": 5})
    >>> float(env(12.5))
    0.5
    """
    spec = dict(spec)
    shape = spec.pop("shape")
    peak = float(spec.pop("peak_intensity", 1.0))
    if peak < 0:
        raise ValidationError("peak_intensity", peak, "must be >= 0")
    if shape == "square":
        params = {"start": float(spec["start"]), "duration": _positive(spec, "duration")}
        return Envelope(shape, params, peak)
    if shape == "gaussian":
        params = {"center": float(spec["center"]), "fwhm": _positive(spec, "fwhm")}
        return Envelope(shape, params, peak)
    if shape == "double_gaussian":
        ratio = float(spec.get("ratio", 1.0))
        if not 0 < ratio:
            raise ValidationError("ratio", ratio, "must be > 0")
        params = {"center1": float(spec["center1"]), "center2": float(spec["center2"]),
                  "fwhm": _positive(spec, "fwhm"), "ratio": ratio}
        c1, c2, w = params["center1"], params["center2"], params["fwhm"]
        grid = np.linspace(min(c1, c2) - w, max(c1, c2) + w, 20001)
        params["norm"] = float(_double_gaussian(grid, params).max())
        return Envelope(shape, params, peak)
    if shape == "samples":
        values = np.asarray(spec["values"], dtype=float)
        if values.ndim != 1 or len(values) < 2:
            raise ValidationError("values", values.shape, "need a 1-d array of >= 2 samples")
        if values.min() < 0:
            raise ValidationError("values", values.min(), "amplitudes must be >= 0")
        if values.max() > 0:
            values = values / values.max()
        params = {"start": float(spec.get("start", 0.0)), "step": _positive(spec, "step")}
        return Envelope(shape, params, peak, values)
    raise ValidationError("shape", shape, f"must be one of {SHAPES}")


def load_samples(path, peak_intensity=1.0):
    """Read a two-column (time ns, amplitude) text file into a samples envelope.

    The time column must be uniformly spaced.
    """
    data = np.loadtxt(path, ndmin=2)
    t, a = data[:, 0], data[:, 1]
    step = np.diff(t)
    if len(t) < 2 or not np.allclose(step, step[0], rtol=1e-6, atol=1e-9):
        raise SamplingError(f"{path}: time column must be uniformly spaced")
    return make_envelope({"shape": "samples", "start": t[0], "step": step[0],
                          "values": a, "peak_intensity": peak_intensity})


def eom_filter(env, rise_time=EOM_RISE_TIME, step=DEFAULT_STEP):
    """Single-pole low-pass on the intensity envelope.

    The time constant is ``rise_time / ln 9`` so that the 10-90 % rise of a
    step input equals ``rise_time``.  Returns a samples-form Envelope.
    """
    if not rise_time >= 0:
        raise ValidationError("rise_time", rise_time, "must be >= 0")
    if env.shape == "samples":
        step = env.params["step"]
    if rise_time > 0 and step > rise_time / 5:
        raise SamplingError(
            f"step {step} ns undersamples rise_time {rise_time} ns; need step <= {rise_time / 5:g}")
    lo, hi = env.support
    tau = rise_time / math.log(9.0)
    n = int(math.ceil((hi - lo + 10 * tau) / step)) + 1
    t = lo + step * np.arange(n)
    x = env(t)
    if rise_time == 0:
        y = x
    else:
        a = math.exp(-step / tau)
        y = _one_pole(x, a)
    out = Envelope("samples", {"start": lo, "step": step}, env.peak_intensity,
                   np.clip(y, 0.0, 1.0))
    return out


def _one_pole(x, a):
    # y[n] = a*y[n-1] + (1-a)*x[n], written as a scan
    from scipy.signal import lfilter
    return lfilter([1.0 - a], [1.0, -a], x)


def rabi_frequency(intensity, transition, calib=RABI_CALIB, branching=None):
    """Rabi frequency (GHz, cyclic) of a transition at the given intensity.

    Spin-flipping transitions carry the relative dipole weight
    ``sqrt(sqrt(branching / (1 - branching)))``.
    """
    intensity = np.asarray(intensity, dtype=float)
    if np.any(intensity < 0):
        raise ValidationError("intensity", intensity, "must be >= 0")
    if transition.spin_preserving:
        weight = 1.0
    else:
        if branching is None:
            raise ValueError("branching required for a spin-flipping transition")
        weight = math.sqrt(math.sqrt(branching / (1.0 - branching)))
    return calib * np.sqrt(intensity) * weight


@dataclass(frozen=True)
class Pulse:
    """One laser pulse: envelope, addressed transition and detuning from it."""

    envelope: Envelope
    target: int
    detuning: float = 0.0  # GHz
    eom_rise_time: float = 0.0  # ns, 0 disables the filter

    def laser_frequency(self, ls):
        return ls.frequency(self.target) + self.detuning

    @property
    def support(self):
        lo, hi = self.envelope.support
        if self.envelope.shape == "samples":
            return lo, hi
        return lo, hi + 10 * self.eom_rise_time / math.log(9.0)

    def filtered(self, step=DEFAULT_STEP):
        if self.eom_rise_time > 0 and self.envelope.shape != "samples":
            return replace(self, envelope=eom_filter(self.envelope, self.eom_rise_time, step))
        return self

    def intensity(self, t):
        return self.envelope.intensity(t)


@dataclass(frozen=True)
class Sequence:
    """Pump then control pulse, repeated every ``period`` ns."""

    pump: Pulse
    control: Pulse
    period: float
    n_repeats: int = 1

    @property
    def pulses(self):
        return tuple(p for p in (self.pump, self.control) if p is not None)

    @property
    def duration(self):
        return self.period * self.n_repeats

    def local_time(self, t):
        return np.mod(t, self.period)

    def intensities(self, t):
        """Pump and control intensity at (possibly absolute) times ``t``."""
        tl = self.local_time(np.asarray(t, dtype=float))
        out = []
        for p in (self.pump, self.control):
            out.append(np.zeros_like(tl) if p is None else p.intensity(tl))
        return out[0], out[1]

    def active(self, t):
        """Index of the pulse whose support contains t (0 pump, 1 control, -1 none)."""
        tl = self.local_time(np.asarray(t, dtype=float))
        idx = np.full(tl.shape, -1)
        for k, p in enumerate((self.pump, self.control)):
            if p is not None:
                lo, hi = p.support
                idx[(tl >= lo) & (tl <= hi)] = k
        return idx


def build_sequence(pump, control, period, n_repeats=1, step=DEFAULT_STEP):
    """Validate the timing of a pump/control pair and return a Sequence.

    ``pump`` and ``control`` are Pulse objects (either may be None).  Envelopes
    with an EOM rise time are converted to filtered sample form.
    """
    if not period > 0:
        raise ValidationError("period", period, "must be > 0")
    if int(n_repeats) < 1:
        raise ValidationError("n_repeats", n_repeats, "must be >= 1")
    pulses = []
    for name, p in (("pump", pump), ("control", control)):
        if p is None:
            pulses.append(None)
            continue
        p = p.filtered(step)
        lo, hi = p.support
        if lo < 0 or hi > period:
            raise SchedulingError(
                f"{name} pulse occupies [{lo:g}, {hi:g}] ns, outside the period [0, {period:g}] ns",
                (lo, hi))
        pulses.append(p)
    if pulses[0] is not None and pulses[1] is not None:
        (a0, a1), (b0, b1) = pulses[0].support, pulses[1].support
        if a0 < b1 and b0 < a1:
            raise SchedulingError(
                f"pump [{a0:g}, {a1:g}] ns overlaps control [{b0:g}, {b1:g}] ns",
                (max(a0, b0), min(a1, b1)))
    return Sequence(pulses[0], pulses[1], float(period), int(n_repeats))
