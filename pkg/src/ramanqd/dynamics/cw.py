"""
Continuous-wave resonance fluorescence: one scanning laser, optionally a
second fixed laser.

With two lasers there is no common rotating frame for all four couplings.
Each transition is driven coherently by its nearer laser; the other laser's
far-detuned contribution enters as an incoherent (Lorentzian) pumping rate.
When the four coherent couplings form an inconsistent loop, the most detuned
one is also demoted to an incoherent rate.
"""

from dataclasses import dataclass
import math

import numpy as np

from ..levels import (TRANSITION_TABLE, RED_LABELS, BLUE_LABELS, TRION_STATES,
                      DOWN, UP)
from ..pulses import RABI_CALIB, rabi_frequency
from .model import (FrameModel, collapse_operators, commutator_super, dissipator,
                    noise_realizations, DIM, TWO_PI)
from .master import steady_state


@dataclass(frozen=True)
class CWLaser:
    frequency: float  # GHz relative to the zero-field transition
    intensity: float  # nW/um^2


def saturation_parameter(ls, label, intensity, calib=RABI_CALIB):
    """s = 2 Omega^2 / Gamma_tot^2 for a resonant drive on ``label``."""
    tr = ls.transition(label)
    om = TWO_PI * rabi_frequency(intensity, tr, calib, ls.branching)
    return 2 * om ** 2 / (ls.Gamma + ls.gamma) ** 2


def intensity_for_saturation(ls, label, s, calib=RABI_CALIB):
    return s / saturation_parameter(ls, label, 1.0, calib)


def _channel_rates(ls, rho):
    pops = np.real(np.diag(rho))
    out = {}
    for label, (g, e, _) in TRANSITION_TABLE.items():
        out[label] = ls.transition(label).decay_rate * pops[e]
    return out


def _two_laser_liouvillian(ls, noise, lasers, offset, nonres, calib, spin_offset=0.0):
    E = ls.level_energies.astype(float).copy()
    shift = spin_offset
    E[UP] += 0.5 * shift
    E[DOWN] -= 0.5 * shift
    for e in TRION_STATES:
        E[e] += offset
    g2 = 0.5 * (ls.Gamma + ls.gamma)
    coherent = {}
    incoherent = []
    for label, (g, e, _) in TRANSITION_TABLE.items():
        tr = ls.transition(label)
        nu = E[e] - E[g]
        det = [abs(l.frequency - nu) for l in lasers]
        near = int(np.argmin(det))
        for k, l in enumerate(lasers):
            om = TWO_PI * rabi_frequency(l.intensity, tr, calib, ls.branching)
            if k == near:
                coherent[label] = (k, om, det[k])
            elif om > 0:
                d = TWO_PI * (l.frequency - nu)
                incoherent.append((g, e, om ** 2 * g2 / (d ** 2 + g2 ** 2)))
    # the four transitions form one loop: 1(u-U) 2(u-D) 3(d-U) 4(d-D)
    loop = [(1, +1), (2, -1), (4, +1), (3, -1)]
    mismatch = sum(sgn * lasers[coherent[lab][0]].frequency for lab, sgn in loop)
    if abs(mismatch) > 1e-12:
        worst = max(coherent, key=lambda lab: coherent[lab][2])
        k, om, _ = coherent.pop(worst)
        g, e, _ = TRANSITION_TABLE[worst]
        nu = E[e] - E[g]
        d = TWO_PI * (lasers[k].frequency - nu)
        incoherent.append((g, e, om ** 2 * g2 / (d ** 2 + g2 ** 2)))
    # frame phases: phi_e - phi_g = laser frequency on every coherent edge
    phi = {DOWN: 0.0}
    changed = True
    while changed:
        changed = False
        for lab, (k, _, _) in coherent.items():
            g, e, _ = TRANSITION_TABLE[lab]
            f = lasers[k].frequency
            if g in phi and e not in phi:
                phi[e] = phi[g] + f
                changed = True
            elif e in phi and g not in phi:
                phi[g] = phi[e] - f
                changed = True
    H = np.zeros((DIM, DIM), complex)
    for i in range(DIM):
        H[i, i] = TWO_PI * (E[i] - phi.get(i, 0.0))
    for lab, (k, om, _) in coherent.items():
        g, e, _ = TRANSITION_TABLE[lab]
        H[g, e] = H[e, g] = 0.5 * om
    L = commutator_super(H)
    for j in collapse_operators(ls, noise, nonres):
        L = L + dissipator(j.op)
    for g, e, w in incoherent:
        up = np.zeros((DIM, DIM), complex)
        up[e, g] = math.sqrt(w)
        L = L + dissipator(up) + dissipator(up.conj().T)
    return L


def cw_steady_state(ls, noise, lasers, offset=0.0, nonres_intensity=None, calib=RABI_CALIB,
                    spin_offset=0.0):
    lasers = [l if isinstance(l, CWLaser) else CWLaser(*l) for l in lasers]
    if len(lasers) == 1:
        m = FrameModel(ls, noise, lasers[0].frequency, offset, nonres_intensity, calib,
                       spin_offset=spin_offset)
        L = m.liouvillian(math.sqrt(lasers[0].intensity))
    elif len(lasers) == 2:
        L = _two_laser_liouvillian(ls, noise, lasers, offset, nonres_intensity, calib,
                                   spin_offset)
    else:
        raise ValueError("one or two lasers supported")
    return steady_state(L)


def cw_channel_rates(ls, noise, lasers, nonres_intensity=None, n_nodes=9, calib=RABI_CALIB,
                     n_spin_nodes=3):
    """Noise-averaged steady-state emission rate (1/ns) per transition."""
    pairs, weights = noise_realizations(ls, noise, nonres_intensity, n_nodes, n_spin_nodes)
    acc = {k: 0.0 for k in TRANSITION_TABLE}
    for (d, sd), w in zip(pairs, weights):
        rho = cw_steady_state(ls, noise, lasers, d, nonres_intensity, calib, sd)
        for k, v in _channel_rates(ls, rho).items():
            acc[k] += w * v
    return acc


def cw_rf_spectrum(ls, noise, scan, intensity, fixed_laser=None, leak=0.1,
                   nonres_intensity=None, n_nodes=9, calib=RABI_CALIB):
    """Red and blue pixel count rates (photons/ns) versus scanning-laser frequency.

    ``fixed_laser`` is an optional ``(frequency GHz, intensity)`` second laser.
    The red pixel collects transitions 1+2, the blue pixel 3+4 plus ``leak``
    times the red signal.
    """
    scan = np.asarray(scan, dtype=float)
    red = np.empty(len(scan))
    blue = np.empty(len(scan))
    for i, f in enumerate(scan):
        lasers = [CWLaser(f, intensity)]
        if fixed_laser is not None:
            lasers.append(CWLaser(*fixed_laser))
        r = cw_channel_rates(ls, noise, lasers, nonres_intensity, n_nodes, calib)
        red[i] = sum(r[k] for k in RED_LABELS)
        blue[i] = sum(r[k] for k in BLUE_LABELS) + leak * red[i]
    return {"frequency": scan, "red": red, "blue": blue}


def preparation_efficiency(ls, noise, pump_label=1, pump_saturation=1.0,
                           probe_label=3, probe_intensity=None, nonres_intensity=None,
                           n_nodes=9, calib=RABI_CALIB):
    """Spin preparation efficiency from the two-laser red-signal ratio.

    Laser 1 pumps on ``pump_label``; laser 2 sits on ``probe_label`` (pumping
    disrupted) or is absent (pumping present).  Returns
    ``1 - red_present / red_disrupted``.
    """
    I1 = intensity_for_saturation(ls, pump_label, pump_saturation, calib)
    if probe_intensity is None:
        probe_intensity = I1
    l1 = CWLaser(ls.frequency(pump_label), I1)
    l2 = CWLaser(ls.frequency(probe_label), probe_intensity)
    present = cw_channel_rates(ls, noise, [l1], nonres_intensity, n_nodes, calib)
    disrupted = cw_channel_rates(ls, noise, [l1, l2], nonres_intensity, n_nodes, calib)
    red_p = sum(present[k] for k in RED_LABELS)
    red_d = sum(disrupted[k] for k in RED_LABELS)
    return 1.0 - red_p / red_d
