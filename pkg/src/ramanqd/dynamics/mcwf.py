"""
Quantum-jump (Monte-Carlo wavefunction) unraveling of the Lindblad generator.

Every trajectory owns a Philox stream keyed by ``(seed, trajectory index)``,
so a record is bit-identical for a fixed seed no matter how trajectories are
sharded across workers.  Each trajectory runs ``seq.n_repeats`` consecutive
periods; sequence index = trajectory * n_repeats + repeat.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import math

import numpy as np

from ..pulses import RABI_CALIB, DEFAULT_STEP
from .master import Schedule, thermal_ground_state, check_density_matrix
from .model import (FrameModel, DIM, TRION_MASK, offset_sigma, spin_sigma,
                    correlated_normal)
from ..levels import UP, DOWN

BUFFER = 64
MAX_JUMP_PROB = 0.1
MASK64 = (1 << 64) - 1


@dataclass
class ClickRecord:
    """Photon emission events.

    ``times`` are local to the sequence period (ns), ``labels`` the emitting
    transition, ``sequence`` the global sequence index.
    """

    times: np.ndarray
    labels: np.ndarray
    sequence: np.ndarray
    n_sequences: int
    period: float
    rng_seed: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        self.sequence = np.asarray(self.sequence, dtype=np.int64)
        if not (len(self.times) == len(self.labels) == len(self.sequence)):
            raise ValueError("event arrays must have equal length")

    def __len__(self):
        return len(self.times)

    @property
    def absolute_times(self):
        return self.sequence * self.period + self.times

    def sorted(self):
        order = np.lexsort((self.times, self.sequence))
        return self.subset(order)

    def subset(self, idx):
        return ClickRecord(self.times[idx], self.labels[idx], self.sequence[idx],
                           self.n_sequences, self.period, self.rng_seed, dict(self.meta))

    def select(self, labels=None, window=None):
        m = np.ones(len(self), dtype=bool)
        if labels is not None:
            m &= np.isin(self.labels, list(labels))
        if window is not None:
            m &= (self.times >= window[0]) & (self.times < window[1])
        return self.subset(np.flatnonzero(m))

    def counts_per_sequence(self):
        return np.bincount(self.sequence, minlength=self.n_sequences)

    def to_rows(self):
        return [(float(t), int(l), int(s)) for t, l, s in
                zip(self.times, self.labels, self.sequence)]


def trajectory_generator(seed, index):
    """Independent Philox stream for trajectory ``index`` of run ``seed``."""
    key = ((int(seed) & MASK64) << 64) | (int(index) & MASK64)
    return np.random.Generator(np.random.Philox(key=key))


class _Streams:
    def __init__(self, seed, indices):
        self.gens = [trajectory_generator(seed, i) for i in indices]
        self.normal = np.array([g.standard_normal(2) for g in self.gens]).reshape(-1, 2)
        self.buf = np.array([g.random(BUFFER) for g in self.gens])
        self.ptr = np.zeros(len(self.gens), dtype=int)

    def uniform(self, rows):
        rows = np.asarray(rows)
        full = rows[self.ptr[rows] >= BUFFER]
        for r in full:
            self.buf[r] = self.gens[r].random(BUFFER)
            self.ptr[r] = 0
        u = self.buf[rows, self.ptr[rows]]
        self.ptr[rows] += 1
        return u


def _sample_initial(rho0, u):
    w, V = np.linalg.eigh(rho0)
    w = np.clip(w, 0, None)
    cdf = np.cumsum(w / w.sum())
    k = np.minimum(np.searchsorted(cdf, u, side="right"), DIM - 1)
    return V[:, k].T.astype(complex)


def _bin_grid(sigma):
    if sigma <= 0:
        return np.zeros(1)
    step = sigma / 4
    return step * np.arange(-24, 25)


def _apply(P, psi):
    # explicit sums keep each row's arithmetic independent of the batch size
    out = P[..., 0] * psi[:, None, 0]
    for j in range(1, DIM):
        out = out + P[..., j] * psi[:, None, j]
    return out


class JumpStepError(ValueError):
    pass


def _check_jump_probability(props, dt):
    # worst-case norm loss per step over all propagators and initial states
    smin = np.linalg.svd(props, compute_uv=False)[..., -1]
    p = 1.0 - float(np.min(smin)) ** 2
    if p > MAX_JUMP_PROB:
        raise JumpStepError(f"per-step jump probability {p:.3f} exceeds {MAX_JUMP_PROB}; "
                            f"reduce dt below {dt * MAX_JUMP_PROB / p:g} ns")


def _run_shard(args):
    (seq, ls, noise, indices, seed, dt, rho0, nonres, calib, pop_stride) = args
    m = len(indices)
    streams = _Streams(seed, indices)
    sigma = offset_sigma(ls, noise, nonres)
    offsets = sigma * streams.normal[:, 0]
    spin = spin_sigma(ls, noise, nonres) * correlated_normal(
        streams.normal[:, 0], streams.normal[:, 1], noise.spin_charge_correlation)
    grid = _bin_grid(sigma)
    if len(grid) > 1:
        bins = np.clip(np.rint(offsets / (grid[1] - grid[0])).astype(int) + len(grid) // 2,
                       0, len(grid) - 1)
    else:
        bins = np.zeros(m, dtype=int)
    resid = offsets - grid[bins]
    # the sub-bin optical residual and the spin offset are diagonal in H and
    # are applied as a per-step phase
    diag_phase = np.where(TRION_MASK, 1.0, 0.0)[None, :] * resid[:, None]
    diag_phase[:, UP] += 0.5 * spin
    diag_phase[:, DOWN] -= 0.5 * spin
    correction = np.exp(-2j * math.pi * dt * diag_phase)
    use_correction = bool(np.any(diag_phase))

    sched = Schedule(seq, ls, dt, 0.0, seq.duration)
    sched.check_step()
    ff = sched.frame_freqs
    # propagators per frame, per offset bin, per distinct amplitude
    props = {}
    for k in (0, 1):
        sel = sched.frame == k
        if not sel.any():
            continue
        amps = sched.amplitude[sel]
        uniq, inv = np.unique(amps, return_inverse=True)
        stack = []
        jumps = None
        for d in grid:
            model = FrameModel(ls, noise, ff[k], d, nonres, calib)
            p, _ = model.heff_propagators(uniq, dt)
            _check_jump_probability(p, dt)
            stack.append(p)
            jumps = model.jumps
        amp_index = np.full(sched.n_steps, -1)
        amp_index[sel] = inv
        props[k] = (np.stack(stack, axis=1), amp_index)  # (n_uniq, n_bins, 4, 4)
    if not props:
        model = FrameModel(ls, noise, 0.0, 0.0, nonres, calib)
        jumps = model.jumps
    ops = np.array([j.op for j in jumps])
    labels = np.array([j.label for j in jumps])

    psi = _sample_initial(rho0, streams.uniform(np.arange(m)))
    threshold = streams.uniform(np.arange(m))
    ev_t, ev_l, ev_s = [], [], []
    seq_base = np.asarray(indices, dtype=np.int64) * seq.n_repeats
    n_pop = sched.n_steps // pop_stride + 1 if pop_stride else 0
    pops = np.zeros((n_pop, DIM)) if pop_stride else None
    if pop_stride:
        pops[0] = np.mean(np.abs(psi) ** 2, axis=0)

    cur = sched.frame[0] if sched.n_steps else 0
    rows = np.arange(m)
    for n in range(sched.n_steps):
        k = sched.frame[n]
        t = sched.times[n]
        if k != cur:
            ph = np.exp(2j * math.pi * (ff[k] - ff[cur]) * t)
            psi = psi * np.where(TRION_MASK, ph, 1.0)[None, :]
            cur = k
        table, amp_index = props[k] if props else (None, None)
        if table is None:
            raise RuntimeError("no propagator table")
        P = table[amp_index[n]]  # (n_bins, 4, 4)
        psi = _apply(P[bins] if len(grid) > 1 else P[0][None], psi)
        if use_correction:
            psi = psi * correction
        norm2 = np.sum(np.abs(psi) ** 2, axis=1)
        jumped = np.flatnonzero(norm2 < threshold)
        if len(jumped):
            sub = psi[jumped]
            amps = np.einsum("kab,jb->jka", ops, sub)
            w = np.sum(np.abs(amps) ** 2, axis=2)
            cdf = np.cumsum(w, axis=1)
            u = streams.uniform(jumped) * cdf[:, -1]
            ch = np.minimum((cdf < u[:, None]).sum(axis=1), len(ops) - 1)
            new = amps[np.arange(len(jumped)), ch]
            new = new / np.linalg.norm(new, axis=1)[:, None]
            psi[jumped] = new
            threshold[jumped] = streams.uniform(jumped)
            rad = labels[ch] > 0
            if rad.any():
                tmid = t + 0.5 * dt
                rep = int(tmid // seq.period)
                ev_t.append(np.full(rad.sum(), tmid - rep * seq.period))
                ev_l.append(labels[ch][rad])
                ev_s.append(seq_base[jumped[rad]] + rep)
        if pop_stride and (n + 1) % pop_stride == 0:
            p = np.abs(psi) ** 2
            pops[(n + 1) // pop_stride] = np.mean(p / p.sum(axis=1)[:, None], axis=0)
    if ev_t:
        out = (np.concatenate(ev_t), np.concatenate(ev_l), np.concatenate(ev_s))
    else:
        out = (np.zeros(0), np.zeros(0, int), np.zeros(0, np.int64))
    return out, pops


def mcwf_run(seq, ls, noise, n_traj, seed, dt=DEFAULT_STEP, rho0=None,
             nonres_intensity=None, calib=RABI_CALIB, workers=1, shard_size=2500,
             population_stride=0):
    """Simulate ``n_traj`` trajectories and return their ClickRecord.

    With ``population_stride > 0`` the ensemble-mean populations sampled every
    that many steps are attached as ``record.meta["populations"]``.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    if rho0 is None:
        rho0 = thermal_ground_state(ls)
    check_density_matrix(rho0)
    shards = [list(range(i, min(i + shard_size, n_traj)))
              for i in range(0, n_traj, shard_size)]
    args = [(seq, ls, noise, s, seed, dt, rho0, nonres_intensity, calib, population_stride)
            for s in shards]
    if workers > 1 and len(shards) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_shard, args))
    else:
        results = [_run_shard(a) for a in args]
    t = np.concatenate([r[0][0] for r in results])
    lab = np.concatenate([r[0][1] for r in results])
    s = np.concatenate([r[0][2] for r in results])
    rec = ClickRecord(t, lab, s, n_traj * seq.n_repeats, seq.period, int(seed)).sorted()
    rec.meta["n_traj"] = n_traj
    if population_stride:
        sizes = np.array([len(x) for x in shards], float)
        pops = sum(r[1] * w for r, w in zip(results, sizes)) / sizes.sum()
        rec.meta["populations"] = pops
        rec.meta["population_times"] = dt * population_stride * np.arange(len(pops))
    return rec
