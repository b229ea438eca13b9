"""
Least-squares estimators: exponential decay, lorentzian, Voigt (with etalon
deconvolution), straight line and saturation curve.

All nonlinear models go through one damped Gauss-Newton (Levenberg-Marquardt)
loop with analytic Jacobians and box bounds.  Uncertainties are 1-sigma from
the local curvature, scaled by the reduced chi-square unless
``absolute_sigma`` is set.
"""

from dataclasses import dataclass, field
import json
import math
import warnings

import numpy as np
from scipy.special import wofz

SQRT2 = math.sqrt(2.0)
SQRT2PI = math.sqrt(2.0 * math.pi)
GAUSS_SIGMA_PER_FWHM = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
MAX_ITER = 200


@dataclass
class FitResult:
    model: str
    params: dict
    errors: dict
    residual_norm: float
    converged: bool
    offset: float = 0.0
    flags: list = field(default_factory=list)
    r2: float = float("nan")
    n_iter: int = 0
    cost_history: list = field(default_factory=list, repr=False)
    uncertainty: str = "curvature 1-sigma"

    @property
    def reliable(self):
        return self.converged and not self.flags

    def __getitem__(self, key):
        return self.params[key]

    def to_dict(self):
        return {"model": self.model, "params": self.params, "errors": self.errors,
                "residual_norm": self.residual_norm, "converged": self.converged,
                "offset": self.offset, "flags": list(self.flags), "r2": self.r2,
                "n_iter": self.n_iter, "uncertainty": self.uncertainty}

    def to_json(self, **kw):
        return json.dumps(_jsonable(self.to_dict()), **kw)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(**d)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def levenberg_marquardt(fun, jac, p0, lower, upper, max_iter=MAX_ITER,
                        ftol=1e-15, xtol=1e-12):
    """Minimize 0.5*|fun(p)|^2 within [lower, upper].

    Returns ``(p, J, converged, n_iter, history)`` where ``history`` holds
    the cost after every accepted step (non-increasing by construction).
    """
    p = np.clip(np.asarray(p0, dtype=float), lower, upper)
    r = fun(p)
    cost = 0.5 * float(r @ r)
    J = jac(p)
    lam = None
    history = [cost]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        A = J.T @ J
        g = J.T @ r
        d = np.diag(A).copy()
        d[d <= 0] = 1e-300
        if lam is None:
            lam = 1e-3
        improved = False
        while lam < 1e16:
            try:
                step = np.linalg.solve(A + lam * np.diag(d), -g)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            p_new = np.clip(p + step, lower, upper)
            r_new = fun(p_new)
            cost_new = 0.5 * float(r_new @ r_new)
            if np.isfinite(cost_new) and cost_new <= cost:
                improved = True
                break
            lam *= 10
        if not improved:
            converged = True  # no descent direction left
            break
        dp = np.abs(p_new - p)
        dcost = cost - cost_new
        p, r, cost = p_new, r_new, cost_new
        J = jac(p)
        history.append(cost)
        lam = max(lam / 10, 1e-12)
        if dcost <= ftol * max(cost, 1e-300) or np.all(dp <= xtol * (np.abs(p) + xtol)):
            converged = True
            break
    return p, J, converged, it, history


def _finish(name, names, p, J, r, converged, n_iter, history, y, absolute_sigma,
            flags=None, offset_name="offset"):
    n, k = J.shape
    dof = max(n - k, 1)
    chi2 = float(r @ r)
    try:
        cov = np.linalg.pinv(J.T @ J)
    except np.linalg.LinAlgError:
        cov = np.full((k, k), np.inf)
    if not absolute_sigma:
        cov = cov * chi2 / dof
    errs = np.sqrt(np.clip(np.diag(cov), 0, None))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1 - chi2 / ss_tot if ss_tot > 0 else float("nan")
    params = {nm: float(v) for nm, v in zip(names, p)}
    return FitResult(
        model=name, params=params, errors={nm: float(e) for nm, e in zip(names, errs)},
        residual_norm=math.sqrt(chi2), converged=bool(converged),
        offset=params.get(offset_name, 0.0), flags=list(flags or []), r2=r2,
        n_iter=n_iter, cost_history=history), cov


def _weights(y, weights):
    if weights is None:
        return np.ones_like(y)
    w = np.asarray(weights, dtype=float)
    if w.shape != y.shape or np.any(w < 0):
        raise ValueError("weights must be non-negative and match y")
    return w


def _xy(x, y, n_min):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-d arrays of equal length")
    if len(x) < n_min:
        raise ValueError(f"need at least {n_min} points, got {len(x)}")
    return x, y


# --- exponential -------------------------------------------------------------

def exponential(t, amplitude, tau, offset, t0=0.0):
    return amplitude * np.exp(-(np.asarray(t) - t0) / tau) + offset


def fit_exponential(x, y, weights=None, p0=None, absolute_sigma=False):
    """A*exp(-(t - t0)/tau) + c with ``t0 = x[0]`` (reported as a fixed parameter)."""
    x, y = _xy(x, y, 4)
    w = _weights(y, weights)
    t0 = float(x[0])
    span = float(x[-1] - x[0])
    if span <= 0:
        raise ValueError("x must be increasing")
    ntail = max(1, len(y) // 10)
    if p0 is None:
        c = float(np.median(y[-ntail:]))
        A = float(y[0] - c)
        target = c + A / math.e
        crossed = np.flatnonzero((y - target) * np.sign(A) <= 0)
        tau = float(x[crossed[0]] - t0) if len(crossed) and crossed[0] > 0 else span / 3
        p0 = [A, max(tau, span / len(x)), c]
    yscale = max(np.ptp(y), np.abs(y).max(), 1e-300)
    lower = np.array([-np.inf, span * 1e-6, -np.inf])
    upper = np.array([np.inf, span * 1e3, np.inf])

    def fun(p):
        return w * (exponential(x, p[0], p[1], p[2], t0) - y)

    def jac(p):
        e = np.exp(-(x - t0) / p[1])
        return w[:, None] * np.column_stack([e, p[0] * e * (x - t0) / p[1] ** 2, np.ones_like(x)])

    p, J, ok, it, hist = levenberg_marquardt(fun, jac, p0, lower, upper)
    flags = []
    if abs(p[0]) < 1e-9 * yscale:
        flags.append("amplitude-zero: tau unidentifiable")
    if p[1] >= upper[1] * (1 - 1e-9) or p[1] <= lower[1] * (1 + 1e-9):
        flags.append("tau at bound")
    res, _ = _finish("exponential", ["amplitude", "tau", "offset"], p, J, fun(p), ok, it,
                     hist, y, absolute_sigma, flags)
    res.params["t0"] = t0
    if res.flags:
        res.converged = res.converged and not any(f.startswith("amplitude") for f in flags)
    return res


# --- lorentzian --------------------------------------------------------------

def lorentzian(x, center, fwhm, amplitude, offset):
    return amplitude / (1.0 + ((np.asarray(x) - center) / (0.5 * fwhm)) ** 2) + offset


def _peak_guess(x, y):
    off = float(np.median(np.concatenate([y[: max(1, len(y) // 10)], y[-max(1, len(y) // 10):]])))
    i = int(np.argmax(y - off))
    amp = float(y[i] - off)
    half = off + amp / 2
    above = np.flatnonzero(y >= half)
    width = float(x[above[-1]] - x[above[0]]) if len(above) > 1 else float(np.ptp(x)) / 10
    width = max(width, float(np.min(np.diff(x))))
    return float(x[i]), width, amp, off


def fit_lorentzian(x, y, weights=None, p0=None, absolute_sigma=False):
    x, y = _xy(x, y, 5)
    w = _weights(y, weights)
    if p0 is None:
        p0 = list(_peak_guess(x, y))
    span = float(np.ptp(x))
    lower = np.array([x.min() - span, span * 1e-6, -np.inf, -np.inf])
    upper = np.array([x.max() + span, span * 100, np.inf, np.inf])

    def fun(p):
        return w * (lorentzian(x, *p) - y)

    def jac(p):
        c, f, a, _ = p
        u = (x - c) / (0.5 * f)
        d = 1.0 / (1.0 + u * u)
        dd = -d * d
        return w[:, None] * np.column_stack([
            a * dd * 2 * u * (-1.0 / (0.5 * f)),
            a * dd * 2 * u * (-u / f),
            d,
            np.ones_like(x)])

    p, J, ok, it, hist = levenberg_marquardt(fun, jac, p0, lower, upper)
    res, _ = _finish("lorentzian", ["center", "fwhm", "amplitude", "offset"], p, J, fun(p),
                     ok, it, hist, y, absolute_sigma)
    return res


# --- voigt -------------------------------------------------------------------

def voigt(x, center, gaussian_fwhm, lorentzian_fwhm, amplitude, offset=0.0):
    """Area-normalized Voigt profile times ``amplitude`` plus ``offset``."""
    return amplitude * _voigt_unit(np.asarray(x, float) - center, gaussian_fwhm,
                                   lorentzian_fwhm)[0] + offset


def _voigt_unit(dx, fg, fl):
    s = fg * GAUSS_SIGMA_PER_FWHM
    g = 0.5 * fl
    z = (dx + 1j * g) / (s * SQRT2)
    wz = wofz(z)
    V = wz.real / (s * SQRT2PI)
    return V, z, wz, s


def voigt_fwhm(gaussian_fwhm, lorentzian_fwhm):
    """Olivero-Longbothum approximation of the Voigt FWHM (0.02 % accurate)."""
    fl, fg = lorentzian_fwhm, gaussian_fwhm
    return 0.5346 * fl + math.sqrt(0.2166 * fl ** 2 + fg ** 2)


def fit_voigt(x, y, weights=None, p0=None, absolute_sigma=False):
    x, y = _xy(x, y, 6)
    w = _weights(y, weights)
    if p0 is None:
        c, width, amp, off = _peak_guess(x, y)
        fg = fl = width / 1.64
        # peak height of the guess profile -> area
        peak = _voigt_unit(np.zeros(1), fg, fl)[0][0]
        p0 = [c, fg, fl, amp / peak, off]
    span = float(np.ptp(x))
    dxmin = float(np.min(np.diff(np.sort(x))))
    lower = np.array([x.min() - span, 1e-3 * dxmin, 1e-3 * dxmin, -np.inf, -np.inf])
    upper = np.array([x.max() + span, 10 * span, 10 * span, np.inf, np.inf])

    def fun(p):
        return w * (voigt(x, *p) - y)

    def jac(p):
        c, fg, fl, a, _ = p
        V, z, wz, s = _voigt_unit(x - c, fg, fl)
        dw = -2 * z * wz + 2j / math.sqrt(math.pi)
        norm = 1.0 / (s * SQRT2PI)
        dV_dc = (dw * (-1.0 / (s * SQRT2))).real * norm
        dV_dg = (dw * (1j / (s * SQRT2))).real * norm  # d/d(half lorentz width)
        dV_ds = (dw * (-z / s)).real * norm - V / s
        return w[:, None] * np.column_stack([
            a * dV_dc,
            a * dV_ds * GAUSS_SIGMA_PER_FWHM,
            a * dV_dg * 0.5,
            V,
            np.ones_like(x)])

    p, J, ok, it, hist = levenberg_marquardt(fun, jac, p0, lower, upper)
    names = ["center", "gaussian_fwhm", "lorentzian_fwhm", "amplitude", "offset"]
    res, cov = _finish("voigt", names, p, J, fun(p), ok, it, hist, y, absolute_sigma)
    res._cov = cov
    return res


def fit_voigt_deconvolved(x, y=None, etalon_fwhm=0.25, weights=None, p0=None,
                          absolute_sigma=False):
    """Voigt fit with free offset, then remove the lorentzian etalon width.

    ``x`` may be a Spectrum (its detunings and counts are used).  Lorentzian
    widths add under convolution, so the source lorentzian width is the
    fitted one minus ``etalon_fwhm``; it is clamped at zero with a flag.
    """
    if y is None:
        x, y = x.detunings, x.counts
    if not etalon_fwhm > 0:
        raise ValueError("etalon_fwhm must be > 0")
    res = fit_voigt(x, y, weights, p0, absolute_sigma)
    fg = res.params["gaussian_fwhm"]
    fl = res.params["lorentzian_fwhm"]
    fl_dec = fl - etalon_fwhm
    if fl_dec < 0:
        warnings.warn("fitted lorentzian width below the etalon width; clamped to 0")
        res.flags.append("lorentzian deconvolution clamped")
        fl_dec = 0.0
    total_dec = voigt_fwhm(fg, fl_dec)
    # first-order error propagation through the Olivero formula
    cov = res._cov[1:3, 1:3]
    h = 1e-7 * max(fg, fl_dec, 1e-9)
    grad = np.array([(voigt_fwhm(fg + h, fl_dec) - voigt_fwhm(max(fg - h, 0), fl_dec)) / (2 * h),
                     (voigt_fwhm(fg, fl_dec + h) - voigt_fwhm(fg, max(fl_dec - h, 0))) / (2 * h)])
    err_total = float(math.sqrt(max(grad @ cov @ grad, 0)))
    res.model = "voigt_deconvolved"
    res.params.update({"lorentzian_deconvolved": fl_dec, "fwhm_deconvolved": total_dec,
                       "fwhm_fitted": voigt_fwhm(fg, fl), "etalon_fwhm": etalon_fwhm})
    res.errors.update({"lorentzian_deconvolved": res.errors["lorentzian_fwhm"],
                       "fwhm_deconvolved": err_total})
    return res


# --- linear ------------------------------------------------------------------

def fit_linear(x, y, weights=None):
    """Ordinary (optionally weighted) least squares y = slope*x + intercept."""
    x, y = _xy(x, y, 2)
    w = _weights(y, weights) ** 2
    W = w.sum()
    xm = (w * x).sum() / W
    ym = (w * y).sum() / W
    sxx = (w * (x - xm) ** 2).sum()
    if sxx == 0:
        raise ValueError("x values are all equal")
    slope = (w * (x - xm) * (y - ym)).sum() / sxx
    intercept = ym - slope * xm
    r = np.sqrt(w) * (y - slope * x - intercept)
    chi2 = float(r @ r)
    n = len(x)
    s2 = chi2 / max(n - 2, 1)
    se_slope = math.sqrt(s2 / sxx)
    se_int = math.sqrt(s2 * (1.0 / W + xm ** 2 / sxx))
    ss_tot = float((w * (y - ym) ** 2).sum())
    r2 = 1 - chi2 / ss_tot if ss_tot > 0 else float("nan")
    return FitResult("linear", {"slope": float(slope), "intercept": float(intercept)},
                     {"slope": se_slope, "intercept": se_int}, math.sqrt(chi2), True,
                     offset=float(intercept), r2=r2)


# --- saturation --------------------------------------------------------------

def saturation(x, amplitude, x_sat, offset):
    x = np.asarray(x, dtype=float)
    return offset + amplitude * x / (x + x_sat)


def fit_saturation(x, y, weights=None, p0=None, absolute_sigma=False, x_sat_max=None):
    """c + a*x/(x + x_sat); flagged when x_sat runs into its upper bound."""
    x, y = _xy(x, y, 4)
    w = _weights(y, weights)
    xmax = float(np.max(np.abs(x)))
    if x_sat_max is None:
        x_sat_max = 100 * xmax
    if p0 is None:
        order = np.argsort(x)
        c = float(y[order[0]])
        a = float(y[order[-1]] - c) * 2
        p0 = [a, float(np.median(x)) or xmax / 2, c]
    lower = np.array([-np.inf, 1e-9 * xmax, -np.inf])
    upper = np.array([np.inf, x_sat_max, np.inf])

    def fun(p):
        return w * (saturation(x, *p) - y)

    def jac(p):
        a, xs, _ = p
        q = x / (x + xs)
        return w[:, None] * np.column_stack([q, -a * x / (x + xs) ** 2, np.ones_like(x)])

    p, J, ok, it, hist = levenberg_marquardt(fun, jac, p0, lower, upper)
    flags = []
    if p[1] >= x_sat_max * (1 - 1e-6):
        flags.append("x_sat at upper bound: data not saturating")
    res, _ = _finish("saturation", ["amplitude", "x_sat", "offset"], p, J, fun(p), ok, it,
                     hist, y, absolute_sigma, flags)
    return res


MODELS = {
    "exponential": fit_exponential,
    "lorentzian": fit_lorentzian,
    "voigt": fit_voigt_deconvolved,
    "linear": fit_linear,
    "saturation": fit_saturation,
}
