"""Single-photon statistics from simulated click records.

Quantum-jump trajectories give time-tagged clicks; the HBT histogram of
gated clicks yields g2(0).  Synthetic streams check the estimator itself.

    python3 demos/hbt.py
"""

from ramanqd import photostream as ps
from ramanqd.protocols import NOISE, default_system, gaussian_control, hbt_experiment

for label, stream in [
        ("synthetic, g2 = 0.12", ps.synthetic_stream(200_000, 100.0, 0.3, g2=0.12, seed=1)),
        ("poissonian", ps.synthetic_stream(200_000, 100.0, 0.3, poisson=True, seed=2))]:
    c = ps.hbt_correlate(stream, rng=1)
    print(f"{label:22s} g2(0) = {ps.g2_zero(c, 100.0):.3f} +- {ps.g2_zero_error(c, 100.0):.3f}")

ls = default_system()
rec, coinc, g2, err = hbt_experiment(ls, NOISE, gaussian_control(1.0, 5.0), 300, seed=7)
print(f"{'5 ns Raman photons':22s} g2(0) = {g2:.3f} +- {err:.3f} "
      f"({len(rec)} gated clicks, {rec.n_sequences} sequences)")
