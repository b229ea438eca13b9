"""Raman photon shaping: the photon follows the control envelope.

A weak gaussian control pulse on the spin-flip transition after spin
preparation produces a photon whose intensity copies the pulse; a square
pulse produces an exponential photon whose time constant scales as 1/I.

    python3 demos/shaping.py
"""

from scipy.integrate import trapezoid

from ramanqd.protocols import (NOISE, default_system, gaussian_control, raman_time,
                               raman_waveform, waveform_fwhm)

ls = default_system()

print("gaussian controls, weak driving")
for fwhm, intensity in [(5.0, 1.0), (15.0, 0.4), (40.0, 0.1)]:
    t, w, _ = raman_waveform(ls, NOISE, gaussian_control(intensity, fwhm))
    photons = trapezoid(w, t)
    print(f"  control {fwhm:5.1f} ns -> photon FWHM {waveform_fwhm(t, w):6.2f} ns, "
          f"{photons:.3f} photons/shot")

print("square controls: exponential photons")
for intensity in (1.0, 0.5, 0.25):
    fit = raman_time(ls, NOISE, intensity)
    print(f"  I = {intensity:4.2f} -> tau = {fit['tau']:6.2f} ns, tau*I = "
          f"{fit['tau'] * intensity:5.2f} ns")
