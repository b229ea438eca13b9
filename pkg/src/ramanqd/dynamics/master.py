"""Deterministic Lindblad propagation under a pump/control sequence."""

from dataclasses import dataclass
import math

import numpy as np

from ..levels import GROUND_STATES, TRION_STATES, boltzmann_ratio, DOWN, UP
from ..pulses import RABI_CALIB, DEFAULT_STEP
from .model import FrameModel, change_frame, noise_realizations, DIM

MAX_DRIVEN_STEP = DEFAULT_STEP
TRACE_TOL = 1e-9
POSITIVITY_TOL = 1e-9
CHUNK = 4096


class StepSizeError(ValueError):
    def __init__(self, dt, required):
        self.required = required
        super().__init__(f"step {dt} ns too large while a laser is on; use dt <= {required} ns")


class PositivityError(RuntimeError):
    pass


@dataclass
class MasterResult:
    times: np.ndarray
    rho: np.ndarray  # (n, 4, 4) in the frame given by frame_frequency
    frame_frequency: np.ndarray

    @property
    def populations(self):
        return np.real(np.einsum("nii->ni", self.rho))

    def population(self, state):
        return self.populations[:, state]


def thermal_ground_state(ls):
    """Ground-state density matrix at Boltzmann equilibrium."""
    r = boltzmann_ratio(ls)
    rho = np.zeros((DIM, DIM), complex)
    rho[UP, UP] = r / (1 + r)
    rho[DOWN, DOWN] = 1 / (1 + r)
    return rho


def pure_state(i):
    rho = np.zeros((DIM, DIM), complex)
    rho[i, i] = 1.0
    return rho


def mixed_ground_state():
    rho = np.zeros((DIM, DIM), complex)
    rho[DOWN, DOWN] = rho[UP, UP] = 0.5
    return rho


def check_density_matrix(rho, tol=1e-9):
    rho = np.asarray(rho)
    if rho.shape != (DIM, DIM):
        raise ValueError(f"density matrix must be {DIM}x{DIM}, got {rho.shape}")
    if np.abs(rho - rho.conj().T).max() > 1e-12:
        raise ValueError("density matrix is not hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise ValueError(f"trace {np.trace(rho).real} != 1")
    if np.linalg.eigvalsh(rho).min() < -tol:
        raise ValueError("density matrix is not positive")


class Schedule:
    """Per-step drive amplitude and frame for a sequence on a uniform grid."""

    def __init__(self, seq, ls, dt, t0=0.0, t_end=None):
        self.dt = float(dt)
        self.t0 = float(t0)
        if t_end is None:
            t_end = seq.duration if seq is not None else t0
        n = int(round((t_end - t0) / dt))
        self.n_steps = n
        self.times = t0 + dt * np.arange(n + 1)
        mid = self.times[:-1] + 0.5 * dt
        if seq is None or not seq.pulses:
            self.amplitude = np.zeros(n)
            self.frame = np.zeros(n, dtype=int)
            self.frame_freqs = [0.0, 0.0]
            self.driven = np.zeros(n, dtype=bool)
            return
        ip, ic = seq.intensities(mid)
        self.amplitude = np.sqrt(ip + ic)
        act = seq.active(mid)
        self.driven = act >= 0
        freqs = [p.laser_frequency(ls) if p is not None else None
                 for p in (seq.pump, seq.control)]
        default = 0 if freqs[0] is not None else 1
        freqs = [f if f is not None else freqs[default] for f in freqs]
        self.frame_freqs = freqs
        # steps with no laser keep the previous frame
        frame = act.copy()
        if n:
            if frame[0] < 0:
                first = np.flatnonzero(frame >= 0)
                frame[0] = frame[first[0]] if len(first) else default
            idx = np.where(frame >= 0, np.arange(n), 0)
            np.maximum.accumulate(idx, out=idx)
            frame = frame[idx]
        self.frame = frame

    def check_step(self):
        if self.driven.any() and self.dt > MAX_DRIVEN_STEP * (1 + 1e-12):
            raise StepSizeError(self.dt, MAX_DRIVEN_STEP)

    def step_maps(self, models, method="expm", start=0, stop=None):
        """Yield (step index range, stacked one-step maps) chunk by chunk."""
        stop = self.n_steps if stop is None else stop
        for c0 in range(start, stop, CHUNK):
            c1 = min(c0 + CHUNK, stop)
            maps = np.empty((c1 - c0, DIM * DIM, DIM * DIM), complex)
            for k in (0, 1):
                sel = np.flatnonzero(self.frame[c0:c1] == k)
                if not len(sel):
                    continue
                model = models[k]
                if method == "expm":
                    props, inv = model.propagators(self.amplitude[c0:c1][sel], self.dt)
                    maps[sel] = props[inv]
                elif method == "rk4":
                    maps[sel] = self._rk4(model, c0 + sel)
                else:
                    raise ValueError(f"unknown method {method!r}")
            yield c0, c1, maps

    def _rk4(self, model, steps):
        # drive at the step edges/midpoint; edges re-evaluated from the schedule
        a_mid = self.amplitude[steps]
        a_lo = self._edge_amp[steps]
        a_hi = self._edge_amp[steps + 1]
        return model.rk4_propagators(a_lo, a_mid, a_hi, self.dt)

    def attach_edges(self, seq):
        if seq is None or not seq.pulses:
            self._edge_amp = np.zeros(self.n_steps + 1)
        else:
            ip, ic = seq.intensities(self.times)
            self._edge_amp = np.sqrt(ip + ic)


def frame_models(schedule, ls, noise, offset, nonres_intensity=None, calib=RABI_CALIB):
    """One FrameModel per laser frame; ``offset`` is a number or (optical, spin) pair."""
    d = np.atleast_1d(np.asarray(offset, dtype=float))
    spin = d[1] if len(d) > 1 else 0.0
    return [FrameModel(ls, noise, f, d[0], nonres_intensity, calib, spin_offset=spin)
            for f in schedule.frame_freqs]


def propagate(rho0, schedule, models, method="expm", save_every=1):
    """Run one noise realization; returns saved states and their frames."""
    n = schedule.n_steps
    save_idx = np.arange(0, n + 1, save_every)
    if save_idx[-1] != n:
        save_idx = np.append(save_idx, n)
    out = np.empty((len(save_idx), DIM, DIM), complex)
    frames = np.empty(len(save_idx))
    x = np.asarray(rho0, complex).reshape(-1)
    cur = schedule.frame[0] if n else 0
    ff = schedule.frame_freqs
    si = 0
    if save_idx[0] == 0:
        out[0] = x.reshape(DIM, DIM)
        frames[0] = ff[cur]
        si = 1
    for c0, c1, maps in schedule.step_maps(models, method):
        fr = schedule.frame[c0:c1]
        for j in range(c1 - c0):
            k = fr[j]
            if k != cur:
                t = schedule.times[c0 + j]
                x = change_frame(x.reshape(DIM, DIM), t, ff[cur], ff[k]).reshape(-1)
                cur = k
            x = maps[j] @ x
            if si < len(save_idx) and save_idx[si] == c0 + j + 1:
                out[si] = x.reshape(DIM, DIM)
                frames[si] = ff[cur]
                si += 1
    return schedule.times[save_idx], out, frames


def evolve_master(rho0, seq, ls, noise, dt=DEFAULT_STEP, t_end=None, t0=0.0,
                  save_every=1, offset=None, n_nodes=9, nonres_intensity=None,
                  method="expm", calib=RABI_CALIB, check=True, n_spin_nodes=5):
    """Lindblad evolution of ``rho0`` under ``seq``.

    With ``offset=None`` the per-shot optical and spin-splitting offsets are
    averaged by Gauss-Hermite quadrature (``n_nodes`` x ``n_spin_nodes``
    points); pass a number or an (optical, spin) pair to run one realization.
    Saved states are in the rotating frame of the laser active at that time
    (``frame_frequency``); populations are frame-free.
    """
    check_density_matrix(rho0)
    sched = Schedule(seq, ls, dt, t0, t_end)
    sched.check_step()
    if method == "rk4":
        sched.attach_edges(seq)
    offsets, weights = noise_realizations(ls, noise, nonres_intensity, n_nodes,
                                          n_spin_nodes, offset)
    acc = None
    for d, w in zip(offsets, weights):
        models = frame_models(sched, ls, noise, d, nonres_intensity, calib)
        times, rho, frames = propagate(rho0, sched, models, method, save_every)
        acc = w * rho if acc is None else acc + w * rho
    result = MasterResult(times, acc, frames)
    if check:
        check_physical(result)
    return result


def check_physical(result, trace_tol=TRACE_TOL, pos_tol=POSITIVITY_TOL):
    tr = np.real(np.einsum("nii->n", result.rho))
    drift = np.abs(tr - tr[0]).max()
    if drift > trace_tol:
        i = int(np.abs(tr - tr[0]).argmax())
        raise PositivityError(f"trace drift {drift:.3g} at t={result.times[i]:g} ns")
    herm = 0.5 * (result.rho + result.rho.conj().transpose(0, 2, 1))
    ev = np.linalg.eigvalsh(herm)[:, 0]
    if ev.min() < -pos_tol:
        i = int(ev.argmin())
        raise PositivityError(
            f"negative eigenvalue {ev[i]:.3g} at t={result.times[i]:g} ns; "
            f"populations {np.real(np.diag(result.rho[i]))}")


def emission_waveform(result, label, ls):
    """Photon emission rate (1/ns) into the radiative channel ``label``."""
    tr = ls.transition(label)
    return tr.decay_rate * np.real(result.rho[:, tr.upper, tr.upper])


def emitted_photons(times, waveform, window=None):
    """Integral of a waveform, optionally restricted to [start, stop]."""
    times = np.asarray(times)
    w = np.asarray(waveform)
    if window is not None:
        m = (times >= window[0]) & (times <= window[1])
        times, w = times[m], w[m]
    return float(np.trapezoid(w, times))


def steady_state(liouvillian):
    """Null vector of a Liouvillian, normalized to unit trace."""
    n = int(round(math.sqrt(liouvillian.shape[0])))
    # replace one equation by the trace condition
    A = liouvillian.copy()
    tr = np.eye(n).reshape(-1)
    A[0, :] = tr
    b = np.zeros(n * n, complex)
    b[0] = 1.0
    x = np.linalg.solve(A, b)
    rho = x.reshape(n, n)
    return 0.5 * (rho + rho.conj().T)


__all__ = ["evolve_master", "emission_waveform", "emitted_photons", "MasterResult",
           "thermal_ground_state", "pure_state", "mixed_ground_state", "steady_state",
           "Schedule", "frame_models", "propagate", "StepSizeError", "PositivityError",
           "GROUND_STATES", "TRION_STATES"]
