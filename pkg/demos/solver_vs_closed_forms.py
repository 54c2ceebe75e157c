"""
Closed-form transduction against a direct solve
===============================================

The closed forms drop terms (cavity dynamics in the bad-cavity limit,
counter-rotating scattering in the resolved-sideband limit, the cavity
frequency dependence in the BAE scheme).  A direct solve of the linearized
equations of motion keeps everything; the deviation stays inside the bound.
"""

import numpy as np

from optomech import Regime, SystemParams, approximation_bound, coupling_for_cooperativity
from optomech.response import oracle_deviations

cases = {
    Regime.BAD_CAVITY: SystemParams.from_hz(5e9, 1e4, 5e6, 5e6, 1e-2, 1.0),
    Regime.RED_SIDEBAND: SystemParams.from_hz(5e9, 1e7, 5e4, 5e4, 1e-2, 1.0),
    Regime.BAE: SystemParams.from_hz(5e9, 1e7, 5e4, 5e4, 1e-2, 1.0),
}
for regime, p in cases.items():
    G = float(coupling_for_cooperativity(10.0, p.kappa, p.gamma))
    if regime is Regime.BAD_CAVITY:
        w = np.linspace(-2, 2, 801) * p.omega_m
    elif regime is Regime.RED_SIDEBAND:
        u = np.linspace(-20, 20, 401) * p.gamma * 11
        w = np.concatenate([u - p.omega_m, u + p.omega_m])
    else:
        w = np.linspace(-1, 1, 401) * 20 * p.gamma
    dev = max(oracle_deviations(regime, w, p, G).values())
    bound = approximation_bound(regime, p, G, np.max(np.abs(w)))
    print(f"{regime.value:<22} worst deviation {dev:.2e}  bound {bound:.2e}")

# restoring the exact cavity response in the BAE closed form removes the gap
p = cases[Regime.BAE]
G = float(coupling_for_cooperativity(10.0, p.kappa, p.gamma))
w = np.linspace(-1, 1, 401) * p.kappa
print("BAE, exact cavity response:", max(oracle_deviations(Regime.BAE, w, p, G,
                                                         exact_cavity=True).values()))
