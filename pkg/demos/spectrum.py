"""Raman photon spectra through the quantum regression theorem.

Without spectral diffusion a 50 ns gaussian photon is Fourier limited
(time-bandwidth product 0.44).  With the calibrated charge and spin noise
and moderate nonresonant light the same photon scanned through the etalon
is a few hundred MHz wide; the Voigt fit removes the etalon's own width.

    python3 demos/spectrum.py
"""

import numpy as np

from ramanqd.levels import NoiseParams
from ramanqd.protocols import (NOISE, REVERSE, default_system, etalon_linewidth,
                               gaussian_control, raman_spectrum, waveform_fwhm)

ls = default_system()
control = gaussian_control(0.05, 50.0)

quiet = NoiseParams(gamma_flip_up_down=NOISE.gamma_flip_up_down)
f = np.linspace(-0.05, 0.05, 2001)
f, S = raman_spectrum(ls, quiet, control, REVERSE, nonres_intensity=0.0, grid_step=0.5,
                      freqs=f, n_nodes=1, n_spin_nodes=1)
print(f"noise free: FWHM {waveform_fwhm(f, S) * 1e3:.2f} MHz (0.44/50 ns = 8.8 MHz)")

for detuning in (-0.5, 0.0, 0.5):
    f, S = raman_spectrum(ls, NOISE, control, REVERSE, detuning)
    spec, fit = etalon_linewidth(f, S)
    print(f"detuning {detuning:+.2f} GHz: center {fit['center']:+.3f} GHz, "
          f"deconvolved FWHM {fit['fwhm_deconvolved'] * 1e3:.0f} MHz")
