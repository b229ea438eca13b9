"""
Generators of the four-level open system in the rotating frame of a laser.

All matrices here are angular (rad/ns).  The rotating frame of a laser at
frequency ``nu`` (GHz, relative to the zero-field transition) is
``U(t) = exp(2j*pi*nu*t*P_trion)``; with a single laser on, every coupling
of that laser is static in its frame and only the detunings remain on the
diagonal.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy.linalg import expm

from ..levels import (DOWN, UP, TRION_STATES, GROUND_STATES, decay_channels,
                      spin_flip_rates, charge_noise_sigma)
from ..pulses import RABI_CALIB, rabi_frequency

TWO_PI = 2.0 * math.pi
DIM = 4
EYE = np.eye(DIM)
TRION_MASK = np.zeros(DIM, dtype=bool)
TRION_MASK[list(TRION_STATES)] = True


def ket(i):
    v = np.zeros(DIM, dtype=complex)
    v[i] = 1.0
    return v


def projector(i):
    return np.outer(ket(i), ket(i).conj())


def spre(a):
    return np.kron(a, EYE)


def spost(a):
    return np.kron(EYE, a.T)


def dissipator(c):
    cdc = c.conj().T @ c
    return np.kron(c, c.conj()) - 0.5 * spre(cdc) - 0.5 * spost(cdc)


def commutator_super(h):
    return -1j * (spre(h) - spost(h))


def vec(rho):
    return np.asarray(rho).reshape(*np.shape(rho)[:-2], DIM * DIM)


def unvec(v):
    return np.asarray(v).reshape(*np.shape(v)[:-1], DIM, DIM)


@dataclass(frozen=True)
class Jump:
    """Collapse operator with its rate; ``label`` is 1..4 for radiative jumps."""

    op: np.ndarray
    label: int
    kind: str

    @property
    def rate_op(self):
        return self.op.conj().T @ self.op


def collapse_operators(ls, noise, nonres_intensity=None, radiative=True):
    """Radiative, spin-flip and hole-dephasing jump operators (rates absorbed)."""
    jumps = []
    if radiative:
        for ch in decay_channels(ls):
            if ch.rate > 0:
                jumps.append(Jump(math.sqrt(ch.rate) * ch.operator(), ch.label, "radiative"))
    k_ud, k_du = spin_flip_rates(ls, noise, nonres_intensity)
    if k_ud > 0:
        op = np.zeros((DIM, DIM), complex)
        op[DOWN, UP] = math.sqrt(k_ud)
        jumps.append(Jump(op, 0, "spin_flip"))
    if k_du > 0:
        op = np.zeros((DIM, DIM), complex)
        op[UP, DOWN] = math.sqrt(k_du)
        jumps.append(Jump(op, 0, "spin_flip"))
    g_phi = noise.dephasing_rate
    if g_phi > 0:
        op = math.sqrt(g_phi / 2) * (projector(UP) - projector(DOWN))
        jumps.append(Jump(op, 0, "dephasing"))
    return jumps


class FrameModel:
    """Hamiltonian and Liouvillian pieces for one laser frame.

    ``H(a) = H0 + a*H1`` with ``a = sqrt(intensity)``; ``offset`` is the
    per-shot charge-noise shift of all optical transitions (GHz) and
    ``spin_offset`` the per-shot change of the hole Zeeman splitting.
    """

    def __init__(self, ls, noise, laser_frequency, offset=0.0, nonres_intensity=None,
                 calib=RABI_CALIB, couple=None, spin_offset=0.0):
        self.ls = ls
        self.noise = noise
        self.laser_frequency = float(laser_frequency)
        self.offset = float(offset)
        self.calib = calib
        if nonres_intensity is None:
            nonres_intensity = ls.nonres_intensity
        self.nonres_intensity = nonres_intensity

        E = ls.level_energies.astype(float).copy()
        self.spin_offset = float(spin_offset)
        shift = self.spin_offset
        E[UP] += 0.5 * shift
        E[DOWN] -= 0.5 * shift
        E[TRION_MASK] += self.offset - self.laser_frequency
        self.H0 = np.diag(TWO_PI * E).astype(complex)

        H1 = np.zeros((DIM, DIM), complex)
        labels = couple if couple is not None else (1, 2, 3, 4)
        for label in labels:
            tr = ls.transition(label)
            om = rabi_frequency(1.0, tr, calib, ls.branching)
            H1[tr.upper, tr.lower] = H1[tr.lower, tr.upper] = 0.5 * TWO_PI * om
        self.H1 = H1

        self.jumps = collapse_operators(ls, noise, nonres_intensity)
        D = sum((dissipator(j.op) for j in self.jumps), np.zeros((DIM * DIM,) * 2, complex))
        self.L0 = commutator_super(self.H0) + D
        self.L1 = commutator_super(self.H1)
        self.H_eff0 = self.H0 - 0.5j * sum((j.rate_op for j in self.jumps),
                                           np.zeros((DIM, DIM), complex))

    def hamiltonian(self, amplitude):
        return self.H0 + amplitude * self.H1

    def liouvillian(self, amplitude):
        return self.L0 + amplitude * self.L1

    def propagators(self, amplitudes, dt):
        """exp(L(a)*dt) for each amplitude, computed once per distinct value."""
        amplitudes = np.asarray(amplitudes, dtype=float)
        uniq, inverse = np.unique(amplitudes, return_inverse=True)
        gens = (self.L0[None] + uniq[:, None, None] * self.L1[None]) * dt
        return expm(gens), inverse

    def rk4_propagators(self, amps_start, amps_mid, amps_end, dt):
        """One-step RK4 maps for a generator linear in the drive amplitude."""
        I = np.eye(DIM * DIM)
        Ls = self.L0 + amps_start[:, None, None] * self.L1
        Lm = self.L0 + amps_mid[:, None, None] * self.L1
        Le = self.L0 + amps_end[:, None, None] * self.L1
        K1 = Ls
        K2 = Lm @ (I + 0.5 * dt * K1)
        K3 = Lm @ (I + 0.5 * dt * K2)
        K4 = Le @ (I + dt * K3)
        return I + dt / 6.0 * (K1 + 2 * K2 + 2 * K3 + K4)

    def heff_propagators(self, amplitudes, dt):
        """exp(-i H_eff(a) dt) for the jump unraveling, one per distinct amplitude."""
        amplitudes = np.asarray(amplitudes, dtype=float)
        uniq, inverse = np.unique(amplitudes, return_inverse=True)
        gens = -1j * (self.H_eff0[None] + uniq[:, None, None] * self.H1[None]) * dt
        return expm(gens), inverse


def change_frame(rho, t, nu_from, nu_to):
    """Re-express a rotating-frame density matrix in another laser frame."""
    if nu_from == nu_to:
        return rho
    phase = np.exp(2j * math.pi * (nu_to - nu_from) * t)
    f = np.where(TRION_MASK, phase, 1.0)
    return rho * f[:, None] * f.conj()[None, :]


def noise_nodes(sigma, n_nodes=9):
    """Gauss-Hermite nodes (GHz) and weights for a gaussian offset of width sigma."""
    if sigma <= 0 or n_nodes <= 1:
        return np.zeros(1), np.ones(1)
    x, w = np.polynomial.hermite_e.hermegauss(n_nodes)
    return sigma * x, w / w.sum()


def offset_sigma(ls, noise, nonres_intensity=None):
    if nonres_intensity is None:
        nonres_intensity = ls.nonres_intensity
    return charge_noise_sigma(nonres_intensity, noise)


def spin_sigma(ls, noise, nonres_intensity=None):
    return noise.spin_charge_ratio * offset_sigma(ls, noise, nonres_intensity)


def noise_realizations(ls, noise, nonres_intensity=None, n_nodes=9, n_spin_nodes=5,
                       offset=None):
    """Quadrature over (optical offset, spin-splitting offset) pairs.

    The spin offset has correlation ``noise.spin_charge_correlation`` with
    the optical one.  ``offset`` pins the realization: a
    number fixes the optical offset (spin offset 0), a pair fixes both.
    Returns ``(pairs, weights)`` with ``pairs`` of shape (k, 2).
    """
    if offset is not None:
        d = np.atleast_1d(np.asarray(offset, dtype=float))
        pair = (d[0], d[1] if len(d) > 1 else 0.0)
        return np.array([pair]), np.ones(1)
    so = offset_sigma(ls, noise, nonres_intensity)
    ss = spin_sigma(ls, noise, nonres_intensity)
    d, wd = noise_nodes(so, n_nodes)
    z, ws = noise_nodes(1.0 if ss > 0 else 0.0, n_spin_nodes)
    rho = noise.spin_charge_correlation
    pairs = np.array([(a, ss * correlated_normal(a / so if so > 0 else 0.0, b, rho))
                      for a in d for b in z])
    weights = np.array([x * y for x in wd for y in ws])
    return pairs, weights


def correlated_normal(z1, z2, rho):
    """Standard normal with correlation rho to z1, built from an independent z2."""
    return rho * z1 + np.sqrt(1.0 - rho * rho) * z2


__all__ = ["FrameModel", "collapse_operators", "change_frame", "noise_nodes",
           "noise_realizations", "projector", "ket", "vec", "unvec", "TRION_MASK",
           "GROUND_STATES"]
