"""Two-level rate description of the hole spin populations."""

import numpy as np

from ..levels import TRANSITION_TABLE, UP, DOWN, spin_flip_rates


def pumping_rate(ls, label, saturation):
    """Optical pumping rate (1/ns) out of the ground state driven on ``label``.

    The driven trion holds s/(1+s)/2 of the population and leaks to the other
    ground state through its decay channel that does not return.
    """
    lower, upper, _ = TRANSITION_TABLE[label]
    leak = [ls.transition(k).decay_rate for k, (g, e, _) in TRANSITION_TABLE.items()
            if e == upper and g != lower]
    s = float(saturation)
    frac = 1.0 if np.isinf(s) else s / (1.0 + s)
    return frac * leak[0] / 2.0


def rate_model(ls, noise, times, n_up0=None, drive=None, nonres_intensity=None):
    """Closed-form (N_up, N_down) for two coupled ground populations.

    ``drive`` is an optional ``(transition label, saturation parameter)``.
    Without ``n_up0`` the system starts in Boltzmann equilibrium.
    """
    times = np.asarray(times, dtype=float)
    k_ud, k_du = spin_flip_rates(ls, noise, nonres_intensity)
    a, b = k_ud, k_du  # out of up, out of down
    if drive is not None:
        label, s = drive
        R = pumping_rate(ls, label, s)
        if TRANSITION_TABLE[label][0] == UP:
            a += R
        else:
            b += R
    total = a + b
    if n_up0 is None:
        n_up0 = k_du / (k_ud + k_du) if (k_ud + k_du) > 0 else 0.5
    if total == 0:
        n_up = np.full_like(times, n_up0)
    else:
        n_inf = b / total
        n_up = n_inf + (n_up0 - n_inf) * np.exp(-total * times)
    return n_up, 1.0 - n_up


def relaxation_time(ls, noise, nonres_intensity=None):
    """1/e thermalization time (ns) of the undriven spin."""
    k_ud, k_du = spin_flip_rates(ls, noise, nonres_intensity)
    return 1.0 / (k_ud + k_du)


def pumping_time(ls, label, saturation, noise=None, nonres_intensity=None):
    R = pumping_rate(ls, label, saturation)
    if noise is not None:
        R += sum(spin_flip_rates(ls, noise, nonres_intensity))
    return 1.0 / R


__all__ = ["rate_model", "pumping_rate", "relaxation_time", "pumping_time", "UP", "DOWN"]
