"""Built-in consistency checks: solver vs closed forms, spectra vs variances.

Every check draws parameters from a fixed seed, returns its worst metric and
compares it with a tolerance.  ``mutate=True`` perturbs the closed form under
test by a small relative amount so that the check can be seen to fail.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

from .model import BathState, Regime, SystemParams, coupling_for_cooperativity
from .response import approximation_bound, closed_form, oracle_deviations
from .spectra import (SpectrumTrace, backaction_occupancy, bae_quadrature_split,
                      integrate_spectrum, lab_grid, rotating_grid, spectrum_quadratures_bae,
                      spectrum_x_bad_cavity, spectrum_x_good_cavity, variance_bad_cavity,
                      variance_bae, variance_good_cavity)

MUTATION = 1e-2
INTEGRAL_TOL = 1e-5
EXACT_TOL = 1e-9

# Devices for the integral checks; the good-cavity one keeps
# gamma (1 + C) << kappa << omega_m up to C = 1e4.
INTEGRATION_DEVICES = {
    Regime.BAD_CAVITY: SystemParams.from_hz(5e9, 1e4, 5e7, 5e7, 1e-2, 1.0),
    Regime.RED_SIDEBAND: SystemParams.from_hz(1e12, 1e9, 5e6, 5e6, 1.0, 1.0),
    Regime.BAE: SystemParams.from_hz(5e9, 1e7, 5e4, 5e4, 1e-2, 1.0),
}


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    tolerance: float
    passed: bool
    seconds: float
    detail: str = ""

    def line(self):
        verdict = "PASS" if self.passed else "FAIL"
        tail = f"  {self.detail}" if self.detail else ""
        return (f"{verdict}  {self.name:<22} worst={self.value:.3e}  "
                f"tol={self.tolerance:.1e}  ({self.seconds:.2f} s){tail}")


def random_draws(n, seed=0):
    """``n`` draws of (C, n_m_T, n_c_T) over [0, 1e4] x [0, 1e4] x [0, 1].

    C and n_m_T are log-uniform above 1e-3 with a few exact zeros so both
    ends of the range are covered.
    """
    rng = np.random.default_rng(seed)
    C = 10.0 ** rng.uniform(-3, 4, n)
    n_m = 10.0 ** rng.uniform(-3, 4, n)
    n_c = rng.uniform(0, 1, n)
    C[:: max(n // 10, 1)] = 0.0
    n_m[1:: max(n // 10, 1)] = 0.0
    return np.column_stack([C, n_m, n_c])


def bath_for(params: SystemParams, n_m_T, n_c_T):
    """Bath whose internal occupation gives cavity occupation ``n_c_T``."""
    return BathState(float(n_m_T), float(n_c_T) * params.kappa / params.kappa_i)


# --- integral identities ----------------------------------------------------------

def integral_deviation(regime, C, n_m_T, n_c_T, mutate=False, n_grid=2**14):
    """Worst relative |integral - closed form| over the quadratures of a regime."""
    regime = Regime(regime)
    p = INTEGRATION_DEVICES[regime]
    G = coupling_for_cooperativity(C, p.kappa, p.gamma)
    bath = bath_for(p, n_m_T, n_c_T)
    if regime is Regime.BAD_CAVITY:
        traces = {"x": spectrum_x_bad_cavity(lab_grid(p.omega_m, p.gamma, n_grid), p, G, bath)}
        var = variance_bad_cavity(C, n_m_T, n_c_T)
    elif regime is Regime.RED_SIDEBAND:
        grid = lab_grid(p.omega_m, p.gamma * (1 + C), n_grid)
        traces = {"x": spectrum_x_good_cavity(grid, p, G, bath)}
        var = variance_good_cavity(C, n_m_T, n_c_T)
    else:
        s_x, s_p = spectrum_quadratures_bae(rotating_grid(p.gamma / (2 * np.pi), n_grid), p, G, bath)
        traces = {"X": s_x, "P": s_p}
        var = variance_bae(C, n_m_T, n_c_T)
    worst = 0.0
    for q, tr in traces.items():
        if mutate:
            tr = _mutated_trace(tr)
        got = integrate_spectrum(tr, tail_model="lorentzian").value
        worst = max(worst, abs(got / var.variance(q) - 1.0))
    return worst


def _mutated_trace(tr: SpectrumTrace):
    comps = dict(tr.components)
    comps["vacuum"] = comps["vacuum"] * (1.0 + MUTATION)
    return SpectrumTrace.from_components(tr.freq_hz, comps, tr.frame, tr.metadata)


def _integral_check(regime, n_draws=100, seed=1):
    def run(mutate):
        return max(integral_deviation(regime, *row, mutate=mutate)
                   for row in random_draws(n_draws, seed))
    return run


# --- solver vs closed forms -------------------------------------------------------

def _oracle_case(regime, rng, exact):
    """Random device, coupling and frequency grid for one oracle comparison."""
    lu = lambda a, b: 10.0 ** rng.uniform(a, b)  # noqa: E731
    if regime is Regime.BAD_CAVITY:
        wm = 1e4
        p = SystemParams.from_hz(5e9, wm, *(lu(3, 4) * wm / 2,) * 2, wm * lu(-6, -4), 1.0)
        w = np.linspace(-2.0, 2.0, 801) * p.omega_m
    elif regime is Regime.RED_SIDEBAND:
        wm = 1e7
        k = wm / lu(1.5, 2.5)
        p = SystemParams.from_hz(5e9, wm, k / 2, k / 2, k * lu(-6, -4), 1.0)
        C = lu(-2, 2)
        ge = p.gamma * (1 + C)
        u = np.linspace(-20, 20, 401) * ge
        w = np.concatenate([u - p.omega_m, u + p.omega_m])
        return p, coupling_for_cooperativity(C, p.kappa, p.gamma), w, np.max(np.abs(w))
    else:
        p = SystemParams.from_hz(5e9, 1e7, *(lu(4, 5),) * 2, lu(-3, -1), 1.0)
        span = p.kappa if exact else 20 * p.gamma
        w = np.linspace(-1, 1, 401) * span
    C = lu(-2, 4)
    return p, coupling_for_cooperativity(C, p.kappa, p.gamma), w, np.max(np.abs(w))


def _mutated_closed(regime, w, p, G, exact):
    kw = {"exact_cavity": exact} if regime is Regime.BAE else {}
    cf = closed_form(regime, w, p, G, **kw)
    # scale the largest coefficient of the first output row
    out = cf.outputs[0]
    key = max(((out, i) for i in cf.inputs_of(out)), key=lambda k: np.max(np.abs(cf.coeffs[k])))
    coeffs = dict(cf.coeffs)
    coeffs[key] = coeffs[key] * (1.0 + MUTATION)
    return replace(cf, coeffs=coeffs)


def _oracle_check(regime, exact=False, n_draws=20, seed=2):
    regime = Regime(regime)

    def run(mutate):
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(n_draws):
            p, G, w, wmax = _oracle_case(regime, rng, exact)
            closed = _mutated_closed(regime, w, p, G, exact) if mutate else None
            dev = max(oracle_deviations(regime, w, p, G, exact_cavity=exact,
                                        closed=closed).values())
            bound = EXACT_TOL if exact else approximation_bound(regime, p, G, wmax)
            worst = max(worst, dev / bound)
        return worst
    return run


def _ledger_check():
    def run(mutate):
        C = Fraction(7, 3)
        got = (backaction_occupancy(Regime.BAD_CAVITY, C), backaction_occupancy(Regime.RED_SIDEBAND, C),
               backaction_occupancy(Regime.BAE, C), bae_quadrature_split(C)["P"])
        want = (C, C / 2, C, 2 * C)
        if mutate:
            want = (C, C / 2, C, 2 * C + Fraction(1, 10**6))
        return float(sum(g != w for g, w in zip(got, want)))
    return run


# name -> (tolerance, runner, description); oracle metrics are deviation/bound
CHECKS = {
    "oracle-bad-cavity": (1.0, _oracle_check(Regime.BAD_CAVITY), "solver / closed form, bound ratio"),
    "oracle-good-cavity": (1.0, _oracle_check(Regime.RED_SIDEBAND), "solver / closed form, bound ratio"),
    "oracle-bae": (1.0, _oracle_check(Regime.BAE), "solver / closed form, bound ratio"),
    "oracle-bae-exact": (1.0, _oracle_check(Regime.BAE, exact=True), "exact chi_c, ratio to 1e-9"),
    "integral-bad-cavity": (INTEGRAL_TOL, _integral_check(Regime.BAD_CAVITY), "relative"),
    "integral-good-cavity": (INTEGRAL_TOL, _integral_check(Regime.RED_SIDEBAND), "relative"),
    "integral-bae": (INTEGRAL_TOL, _integral_check(Regime.BAE), "relative"),
    "backaction-ledger": (0.0, _ledger_check(), "count of inexact values"),
}


def run_check(name, mutate=False) -> CheckResult:
    if name not in CHECKS:
        raise KeyError(f"unknown check {name!r}; choose from {sorted(CHECKS)}")
    tol, runner, desc = CHECKS[name]
    t0 = time.perf_counter()
    value = float(runner(mutate))
    passed = value <= tol
    return CheckResult(name, value, tol, passed, time.perf_counter() - t0,
                       desc + (" [mutated]" if mutate else ""))


def run_selftest(mutate=None, names=None):
    """Run the checks (all by default); ``mutate`` names one check to perturb."""
    if mutate is not None and mutate not in CHECKS:
        raise KeyError(f"unknown check {mutate!r}; choose from {sorted(CHECKS)}")
    return [run_check(n, mutate=(n == mutate)) for n in (names or CHECKS)]
