"""
First-order two-time correlations by the quantum regression theorem, and the
time-integrated spectrum of pulsed emission derived from them.
"""

import math

import numpy as np

from ..pulses import RABI_CALIB, DEFAULT_STEP
from .master import Schedule, frame_models, propagate, check_density_matrix
from .model import DIM, TRION_MASK, noise_realizations

MAX_GRID = 2000


class GridTooLargeError(MemoryError):
    def __init__(self, n, cap, suggested_step):
        self.suggested_step = suggested_step
        super().__init__(
            f"G1 grid of {n} points exceeds the cap of {cap}; "
            f"coarsen the grid step to >= {suggested_step:g} ns")


def _frame_change_super(t, nu_from, nu_to):
    phase = np.exp(2j * math.pi * (nu_to - nu_from) * t)
    f = np.where(TRION_MASK, phase, 1.0)
    return np.diag(np.outer(f, f.conj()).reshape(-1))


def _coarse_maps(sched, models, stride, n_coarse, method):
    """Products of fine one-step maps between consecutive coarse grid points."""
    ff = sched.frame_freqs
    U = np.empty((n_coarse - 1, DIM * DIM, DIM * DIM), complex)
    acc = np.eye(DIM * DIM, dtype=complex)
    cur = sched.frame[0]
    frame_at = np.empty(n_coarse)
    frame_at[0] = ff[cur]
    for c0, c1, maps in sched.step_maps(models, method):
        fr = sched.frame[c0:c1]
        for j in range(c1 - c0):
            n = c0 + j
            k = fr[j]
            if k != cur:
                acc = _frame_change_super(sched.times[n], ff[cur], ff[k]) @ acc
                cur = k
            acc = maps[j] @ acc
            if (n + 1) % stride == 0:
                i = (n + 1) // stride
                U[i - 1] = acc
                frame_at[i] = ff[cur]
                acc = np.eye(DIM * DIM, dtype=complex)
    return U, frame_at


def _grid(t_grid, dt):
    t_grid = np.asarray(t_grid, dtype=float)
    step = t_grid[1] - t_grid[0]
    if not np.allclose(np.diff(t_grid), step, rtol=1e-9, atol=1e-9):
        raise ValueError("t_grid must be uniform")
    stride = int(round(step / dt))
    if stride < 1 or abs(stride * dt - step) > 1e-9:
        raise ValueError(f"grid step {step} ns must be a multiple of dt={dt} ns")
    start = int(round(t_grid[0] / dt))
    if abs(start * dt - t_grid[0]) > 1e-9:
        raise ValueError(f"grid start {t_grid[0]} ns must be a multiple of dt={dt} ns")
    return t_grid, step, stride, start


def two_time_correlation(seq, ls, noise, channel, t_grid, rho0, dt=DEFAULT_STEP,
                         offset=None, n_nodes=9, nonres_intensity=None,
                         calib=RABI_CALIB, method="expm", max_grid=MAX_GRID,
                         n_spin_nodes=5):
    """G1(t, t') = <sigma+_c(t) sigma-_c(t')> on a uniform grid.

    The result is expressed in a frame rotating at the nominal frequency of
    transition ``channel``, so the spectrum is centered on the detuning of the
    emitted light from that transition.  The per-shot offsets are averaged
    over Gauss-Hermite nodes unless ``offset`` is given.
    """
    check_density_matrix(rho0)
    t_grid, step, stride, start = _grid(t_grid, dt)
    n = len(t_grid)
    if n > max_grid:
        span = t_grid[-1] - t_grid[0]
        raise GridTooLargeError(n, max_grid, span / (max_grid - 1))
    tr = ls.transition(channel)
    g, e = tr.lower, tr.upper
    nu_c = tr.frequency

    offsets, weights = noise_realizations(ls, noise, nonres_intensity, n_nodes,
                                          n_spin_nodes, offset)

    G = np.zeros((n, n), complex)
    for d, w in zip(offsets, weights):
        G += w * _regression(seq, ls, noise, d, nonres_intensity, calib, method,
                             rho0, dt, start, stride, n, g, e)
    # lab-frame phase relative to the channel frequency is applied inside
    tau = t_grid[:, None] - t_grid[None, :]
    G *= np.exp(-2j * math.pi * nu_c * tau)
    return t_grid, G


def _regression(seq, ls, noise, offset, nonres, calib, method, rho0, dt, start,
                stride, n, g, e):
    t_last = (start + stride * (n - 1)) * dt
    pre = Schedule(seq, ls, dt, 0.0, start * dt)
    pre.check_step()
    if method == "rk4":
        pre.attach_edges(seq)
    models0 = frame_models(pre, ls, noise, offset, nonres, calib) if pre.n_steps else None
    if pre.n_steps:
        _, rho, frames = propagate(rho0, pre, models0, method, save_every=pre.n_steps)
        rho_start, nu_start = rho[-1], frames[-1]
    else:
        rho_start, nu_start = np.asarray(rho0, complex), None

    sched = Schedule(seq, ls, dt, start * dt, t_last)
    sched.check_step()
    if method == "rk4":
        sched.attach_edges(seq)
    models = frame_models(sched, ls, noise, offset, nonres, calib)
    ff = sched.frame_freqs
    f0 = ff[sched.frame[0]] if sched.n_steps else (nu_start or 0.0)
    if nu_start is not None and nu_start != f0:
        ph = np.exp(2j * math.pi * (f0 - nu_start) * start * dt)
        f = np.where(TRION_MASK, ph, 1.0)
        rho_start = rho_start * f[:, None] * f.conj()[None, :]

    U, frame_at = _coarse_maps(sched, models, stride, n, method)
    frame_at[0] = f0
    times = sched.times[::stride][:n]

    # rho(t_i) on the coarse grid
    x = rho_start.reshape(-1)
    X = np.empty((n, DIM * DIM), complex)
    X[0] = x
    for i in range(n - 1):
        x = U[i] @ x
        X[i + 1] = x
    rho = X.reshape(n, DIM, DIM)

    # regression seeds sigma- rho(t') with sigma- = |g><e|
    seeds = np.zeros((n, DIM, DIM), complex)
    seeds[:, g, :] = rho[:, e, :]
    seeds = seeds.reshape(n, -1).T.copy()  # columns

    idx = g * DIM + e  # Tr[|e><g| X] = X[g, e]
    Gt = np.zeros((n, n), complex)
    Y = np.zeros((DIM * DIM, n), complex)
    for i in range(n):
        Y[:, i] = seeds[:, i]
        Gt[i, :i + 1] = Y[idx, :i + 1]
        if i < n - 1:
            Y[:, :i + 1] = U[i] @ Y[:, :i + 1]
    # rotating-frame phase of sigma+ at t and sigma- at t'
    ph = np.exp(2j * math.pi * frame_at * times)
    Gt = Gt * ph[:, None] * ph.conj()[None, :]
    lower = np.tril(Gt, -1)
    return lower + lower.conj().T + np.diag(np.real(np.diag(Gt)))


def g1_spectrum(t_grid, G, freqs):
    """Time-integrated spectrum S(nu) = sum G(t,t') exp(-2 pi i nu (t-t')) dt^2.

    ``freqs`` in GHz; the result has units of (upper-state population) x ns/GHz,
    so multiplying by the channel rate gives photons per GHz.
    """
    t_grid = np.asarray(t_grid)
    step = t_grid[1] - t_grid[0]
    n = len(t_grid)
    C = np.array([np.trace(G, offset=-k) for k in range(n)])
    k = np.arange(n)
    ph = np.exp(-2j * math.pi * np.outer(np.asarray(freqs, float), k * step))
    S = step ** 2 * (C[0].real + 2 * np.real(ph[:, 1:] @ C[1:]))
    return S


def emission_spectrum(seq, ls, noise, channel, t_grid, rho0, freqs, **kw):
    """Spectrum in photons per GHz per sequence emitted into ``channel``."""
    t_grid, G = two_time_correlation(seq, ls, noise, channel, t_grid, rho0, **kw)
    rate = ls.transition(channel).decay_rate
    return rate * g1_spectrum(t_grid, G, freqs)


def spectral_fwhm(freqs, S):
    """FWHM of a sampled single-peaked spectrum by linear interpolation."""
    freqs = np.asarray(freqs)
    S = np.asarray(S)
    i = int(np.argmax(S))
    half = S[i] / 2
    lo = i
    while lo > 0 and S[lo] > half:
        lo -= 1
    hi = i
    while hi < len(S) - 1 and S[hi] > half:
        hi += 1
    if S[lo] > half or S[hi] > half:
        raise ValueError("spectrum does not fall below half maximum inside the grid")
    f_lo = np.interp(half, [S[lo], S[lo + 1]], [freqs[lo], freqs[lo + 1]])
    f_hi = np.interp(half, [S[hi], S[hi - 1]], [freqs[hi], freqs[hi - 1]])
    return float(f_hi - f_lo)


def spectral_centroid(freqs, S, threshold=0.5):
    """Intensity-weighted mean frequency over the region above threshold*max."""
    S = np.asarray(S)
    m = S >= threshold * S.max()
    return float(np.sum(np.asarray(freqs)[m] * S[m]) / np.sum(S[m]))
