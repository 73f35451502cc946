"""Check the SNR arithmetic behind the noise augmentation.

The augmentation stage defines SNR as reference energy over total noise
energy, with the reference pinned to the median breathing-class residual.
This script verifies the calibration empirically: at -20 dB with reference
energy 1 the added noise should average 100 units of energy on a 64 x 100
matrix, every draw should hit that exactly in exact-scaling mode, and the
noise level must not depend on the sample being corrupted.

Run: python demos/02_noise_calibration.py
"""

import numpy as np

from uwbocc.augment import AugmentPolicy, SnrReference, add_noise, compute_reference_energy
from uwbocc.core import MeanRemovedMatrix, frobenius_energy
from uwbocc.simulate import synth_dataset
from uwbocc.pipeline import residual_samples

ref = SnrReference(1.0)
zero = MeanRemovedMatrix(np.zeros((64, 100), dtype=complex), 0.5e-9, 0.1)

print("default mode, 2000 draws per SNR (energy is exact only in expectation):")
for snr_db in (0.0, -10.0, -20.0):
    target = ref.e_s * 10 ** (-snr_db / 10)
    energies = [frobenius_energy(add_noise(zero, ref, snr_db, rng=np.random.default_rng((1, i))))
                for i in range(2000)]
    mean = float(np.mean(energies))
    print(f"  {snr_db:+6.1f} dB: mean noise energy {mean:8.3f}  "
          f"(target {target:7.1f}, off by {100 * (mean / target - 1):+.2f}%)")

print("\nexact-scaling mode, per-draw relative error:")
exact = AugmentPolicy.fixed_grid((-20.0,), exact_scaling=True)
errors = []
for i in range(200):
    noisy = add_noise(zero, ref, -20.0, exact, rng=np.random.default_rng((2, i)))
    errors.append(abs(frobenius_energy(noisy) / 100.0 - 1.0))
print(f"  worst over 200 draws: {max(errors):.2e}")

# The sigma comes from the reference alone, so a strong and a weak sample
# get the same noise floor.  That is the point: the label must not leak
# through the corruption level.
records = synth_dataset({"breathing": 8, "empty": 8}, rng=5)
samples = residual_samples(records)
residuals = [s.residual for s in samples]
data_ref = compute_reference_energy([s.residual for s in samples
                                     if s.label.value == "breathing"])
print(f"\nreference from 8 breathing residuals: e_s = {data_ref.e_s:.4f}")
for name, sample in (("breathing", residuals[0]), ("empty", residuals[-1])):
    added = [frobenius_energy(add_noise(sample, data_ref, -20.0,
                                        rng=np.random.default_rng((3, i))))
             - frobenius_energy(sample) for i in range(500)]
    print(f"  mean added energy, {name} sample: {np.mean(added):9.3f}")
print(f"  (both should sit near {data_ref.e_s * 100:.1f}, regardless of content)")

# +inf is the no-op passthrough used for clean evaluation points.
clean = add_noise(residuals[0], data_ref, float("inf"), rng=np.random.default_rng(0))
print(f"\n+inf dB passthrough unchanged: {np.array_equal(clean.data, residuals[0].data)}")
