"""
Sideband cooling of the membrane mode
=====================================

Thermal occupation of the 707.4 kHz mode at dilution-fridge temperatures,
and the occupation reached by red-sideband cooling at C of order 1e4.
"""

import numpy as np

from optomech import (TWO_PI, bose_occupation, coupling_for_cooperativity, membrane_device,
                      optical_damping)
from optomech.spectra import sideband_cooled_occupation

dev = membrane_device()
print(f"omega_m/2pi = {dev.omega_m / TWO_PI / 1e3:.1f} kHz, kappa/2pi = "
      f"{dev.kappa / TWO_PI / 1e3:.0f} kHz, gamma/2pi = {dev.gamma / TWO_PI * 1e3:.1f} mHz")
print(f"sideband resolution omega_m/kappa = {dev.sideband_resolution:.2f}")

for T in (0.025, 0.037, 0.1, 0.5):
    print(f"T = {T * 1e3:5.0f} mK  ->  n_m^T = {bose_occupation(T, dev.omega_m):9.1f}")

n_T = bose_occupation(0.037, dev.omega_m)
for C in (1e2, 1e3, 1.02e4, 3e4):
    G = coupling_for_cooperativity(C, dev.kappa, dev.gamma)
    rates = optical_damping(G, dev.kappa, dev.gamma)
    n = sideband_cooled_occupation(C, n_T, 0.2)
    print(f"C = {C:8.0f}: G/2pi = {G / TWO_PI:6.1f} Hz, gamma_opt/2pi = "
          f"{rates.gamma_opt / TWO_PI:7.2f} Hz, n_m = {n:.3f}")

# the cavity bath sets the floor: n_m -> n_c^T as C -> infinity
Cs = np.geomspace(1, 1e7, 7)
print("floor approach:", np.round([sideband_cooled_occupation(C, n_T, 0.2) for C in Cs], 4))
