"""
Three ways to measure a mechanical oscillator
=============================================

Position variance under continuous measurement in the bad-cavity,
red-sideband and two-tone backaction-evading regimes, from the closed forms
and from numerically integrated spectra.
"""

import numpy as np

from optomech import (BathState, Regime, SystemParams, backaction_occupancy,
                      coupling_for_cooperativity, integrate_spectrum, variance_bad_cavity,
                      variance_bae, variance_good_cavity)
from optomech.spectra import (lab_grid, rotating_grid, spectrum_quadratures_bae,
                              spectrum_x_bad_cavity)

# a small thermal bath and a cold cavity make the backaction easy to see
n_T, n_c = 5.0, 0.0
print("C      bad x^2   red x^2   BAE X^2   BAE P^2")
for C in (0.0, 0.5, 1.0, 2.0, 5.0, 10.0):
    bad = variance_bad_cavity(C, n_T, n_c).variance("x")
    red = variance_good_cavity(C, n_T, n_c).variance("x")
    bae = variance_bae(C, n_T, n_c)
    print(f"{C:<6g} {bad:8.3f}  {red:8.3f}  {bae.variance('X'):8.3f}  {bae.variance('P'):8.3f}")

# backaction quanta per regime: C, C/2 and C (all of it in P)
for regime in Regime:
    print(f"{regime.value:<22} backaction at C = 10: {backaction_occupancy(regime, 10.0):g}")

# the same numbers from the spectra: integrate S_x over frequency in Hz
bad_dev = SystemParams.from_hz(5e9, 1e4, 5e7, 5e7, 1e-2, 1.0)
bath = BathState(n_T, 0.0)
G = coupling_for_cooperativity(2.0, bad_dev.kappa, bad_dev.gamma)
s_x = spectrum_x_bad_cavity(lab_grid(bad_dev.omega_m, bad_dev.gamma), bad_dev, G, bath)
print("bad cavity C=2: integrated", integrate_spectrum(s_x, tail_model="lorentzian").value,
      "closed form", variance_bad_cavity(2.0, n_T, n_c).variance("x"))

bae_dev = SystemParams.from_hz(5e9, 1e7, 5e4, 5e4, 1e-2, 1.0)
G = coupling_for_cooperativity(2.0, bae_dev.kappa, bae_dev.gamma)
sX, sP = spectrum_quadratures_bae(rotating_grid(1e-2), bae_dev, G, bath)
for name, tr in (("X", sX), ("P", sP)):
    parts = {k: integrate_spectrum(tr, tail_model="lorentzian", component=k).value
             for k in tr.components}
    print(f"BAE C=2 {name}: " + ", ".join(f"{k} {v:.4f}" for k, v in parts.items()))

# the measured quadrature does not see the measurement at all
G_big = coupling_for_cooperativity(1e3, bae_dev.kappa, bae_dev.gamma)
sX_big, _ = spectrum_quadratures_bae(rotating_grid(1e-2), bae_dev, G_big, bath)
print("S_X unchanged from C=2 to C=1000:", np.array_equal(sX.total, sX_big.total))
