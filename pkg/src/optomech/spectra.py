"""Spectral densities, integrated variances and backaction bookkeeping.

Spectra are stored against frequency in Hz.  Values are the angular-frequency
densities S[omega] in quanta per rad/s, so that integrating over Hz,
``int S df``, equals ``(1/2 pi) int S d omega``: the variance in quanta, or
the photon flux for output spectra.

Lab-frame mechanical spectra are two-sided (peaks at +-omega_m); BAE
quadrature and output spectra are in the rotating frame with a single peak at
zero.  The ``frame`` tag records which.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .constants import TWO_PI
from .errors import RegimeError
from .model import BathState, Regime, SystemParams, cooperativity, params_hash
from .response import (EXTERNAL_BATH, INTERNAL_BATH, MECHANICAL_BATH, noise_channels,
                       transduction_good_cavity)

COMPONENTS = ("vacuum", "thermal", "qba", "classical", "floor")
LAB, ROTATING = "lab", "rotating"


@dataclass(frozen=True)
class SpectrumTrace:
    """A PSD sampled on a strictly increasing frequency grid (Hz).

    ``components`` may be empty (measured or noisy traces); when present they
    sum to ``total``.  ``metadata['peaks']`` lists ``(center_hz, fwhm_hz)``
    pairs used for Lorentzian tail corrections.
    """

    freq_hz: np.ndarray
    total: np.ndarray
    components: dict = field(default_factory=dict)
    frame: str = ROTATING
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        f = np.asarray(self.freq_hz, dtype=float)
        t = np.asarray(self.total, dtype=float)
        object.__setattr__(self, "freq_hz", f)
        object.__setattr__(self, "total", t)
        if f.ndim != 1 or f.shape != t.shape:
            raise ValueError("freq_hz and total must be 1-D arrays of equal length")
        if f.size > 1 and not np.all(np.diff(f) > 0):
            raise ValueError("frequency grid must be strictly increasing")
        if self.frame not in (LAB, ROTATING):
            raise ValueError(f"unknown frame {self.frame!r}")
        for name in self.components:
            if name not in COMPONENTS:
                raise ValueError(f"unknown component {name!r}")

    @classmethod
    def from_components(cls, freq_hz, components, frame=ROTATING, metadata=None):
        comps = {k: np.asarray(v, dtype=float) for k, v in components.items()}
        total = np.zeros(np.shape(freq_hz))
        for name in COMPONENTS:
            if name in comps:
                total = total + comps[name]
        return cls(freq_hz, total, comps, frame, dict(metadata or {}))

    @property
    def omega(self):
        return TWO_PI * self.freq_hz

    @property
    def peaks(self):
        return [tuple(p) for p in self.metadata.get("peaks", [])]

    def component(self, name):
        if name == "total":
            return self.total
        if name in self.components:
            return self.components[name]
        if name in COMPONENTS:
            return np.zeros_like(self.total)
        raise KeyError(name)

    def component_mismatch(self):
        """Max relative deviation between sum(components) and total."""
        if not self.components:
            return 0.0
        s = sum(self.components.values())
        scale = np.maximum(np.abs(self.total), np.finfo(float).tiny)
        return float(np.max(np.abs(s - self.total) / scale))

    def scaled(self, gain, offset=0.0):
        """gain * trace + offset, the offset booked as ``floor``."""
        comps = {k: gain * v for k, v in self.components.items()}
        if comps or offset:
            comps["floor"] = comps.get("floor", 0.0) + np.full_like(self.total, offset)
            return SpectrumTrace.from_components(self.freq_hz, comps, self.frame, self.metadata)
        return replace(self, total=gain * self.total + offset)


# --- grids ----------------------------------------------------------------------

def peak_grid(center_hz, fwhm_hz, n=2**14, span=64.0, refine=2.0):
    """Grid of ``n`` points over center +- span*fwhm, denser near the center.

    A sinh map of a uniform grid: spacing at the center is smaller than at the
    edges by cosh(refine).
    """
    if not fwhm_hz > 0:
        raise ValueError("fwhm must be > 0")
    u = np.linspace(-1.0, 1.0, n)
    if refine > 0:
        u = np.sinh(refine * u) / np.sinh(refine)
    return center_hz + span * fwhm_hz * u


def rotating_grid(fwhm_hz, n=2**14, span=64.0, refine=2.0):
    return peak_grid(0.0, fwhm_hz, n, span, refine)


def lab_grid(omega_m, gamma, n=2**14, span=64.0, refine=2.0):
    """Two windows around -omega_m and +omega_m (Hz), n/2 points each."""
    f_m, w = omega_m / TWO_PI, gamma / TWO_PI
    if span * w >= f_m:
        raise ValueError("windows around +-omega_m overlap; reduce span")
    half = peak_grid(f_m, w, n // 2, span, refine)
    return np.concatenate([-half[::-1], half])


# --- closed-form pieces ---------------------------------------------------------

def lorentzian_pair(omega, gamma, omega_m):
    """(L+, L-, S0): Lorentzians at +-omega_m and S0 = gamma/2 (L+ + L-)."""
    if not gamma > 0:
        raise ValueError("gamma must be > 0")
    omega = np.asarray(omega, dtype=float)
    lp = 1.0 / ((omega - omega_m) ** 2 + (gamma / 2) ** 2)
    lm = 1.0 / ((omega + omega_m) ** 2 + (gamma / 2) ** 2)
    return lp, lm, gamma / 2 * (lp + lm)


def _meta(regime, params, quantity, peaks, **extra):
    md = {"regime": Regime(regime).value, "params_hash": params_hash(params),
          "quantity": quantity, "peaks": [list(p) for p in peaks]}
    md.update(extra)
    return md


def spectrum_x_bad_cavity(grid_hz, params: SystemParams, G, baths: BathState) -> SpectrumTrace:
    """Position spectrum for unresolved sidebands, lab frame.

    The vacuum part peaks only at +omega_m; thermal and backaction parts are
    symmetric double Lorentzians.
    """
    w = TWO_PI * np.asarray(grid_hz, dtype=float)
    lp, _, s0 = lorentzian_pair(w, params.gamma, params.omega_m)
    C = cooperativity(G, params.kappa, params.gamma)
    n_c = baths.n_c_T(params)
    comps = {
        "vacuum": params.gamma / 2 * lp,
        "thermal": baths.n_m_T * s0,
        "qba": C * s0,
        "classical": 2 * C * n_c * s0,
    }
    fm, fw = params.omega_m / TWO_PI, params.gamma / TWO_PI
    return SpectrumTrace.from_components(
        grid_hz, comps, LAB,
        _meta(Regime.BAD_CAVITY, params, "S_x", [(-fm, fw), (fm, fw)], C=float(C)))


def spectrum_from_transduction(tset, output, params: SystemParams, baths: BathState,
                               grid_hz, peaks=(), frame=LAB) -> SpectrumTrace:
    """Assemble sum_z |coefficient|^2 (1/2 + n_z) for one output variable.

    Booking: mechanical 1/2 -> vacuum, mechanical n_m -> thermal, cavity 1/2
    -> qba, internal-cavity n_I -> classical.
    """
    chans = noise_channels(params, baths)
    comps = {name: np.zeros(np.shape(tset.omega)) for name in ("vacuum", "thermal", "qba", "classical")}
    for inp in tset.inputs_of(output):
        mag2 = np.abs(tset.get(output, inp)) ** 2
        spec = chans[inp]
        if spec.bath == MECHANICAL_BATH:
            comps["vacuum"] += 0.5 * mag2
            comps["thermal"] += (spec.density - 0.5) * mag2
        else:
            comps["qba"] += 0.5 * mag2
            if spec.bath == INTERNAL_BATH:
                comps["classical"] += (spec.density - 0.5) * mag2
            elif spec.bath != EXTERNAL_BATH:
                raise AssertionError(spec.bath)
    return SpectrumTrace.from_components(
        grid_hz, comps, frame,
        _meta(tset.regime, params, f"S_{output}", peaks))


def spectrum_x_good_cavity(grid_hz, params: SystemParams, G, baths: BathState,
                           output="x") -> SpectrumTrace:
    """Position (or momentum) spectrum under red-sideband pumping, lab frame."""
    w = TWO_PI * np.asarray(grid_hz, dtype=float)
    tset = transduction_good_cavity(w, params, G)
    gamma_eff = params.gamma + 4.0 * G**2 / params.kappa
    fm, fw = params.omega_m / TWO_PI, gamma_eff / TWO_PI
    tr = spectrum_from_transduction(tset, output, params, baths, grid_hz,
                                    [(-fm, fw), (fm, fw)], LAB)
    tr.metadata["C"] = float(cooperativity(G, params.kappa, params.gamma))
    return tr


def spectrum_quadratures_bae(grid_hz, params: SystemParams, G, baths: BathState,
                             gamma_eff=None, n_m=None):
    """Rotating-frame quadrature spectra (S_X, S_P) under two-tone BAE pumping.

    With an auxiliary cooling tone pass its ``gamma_eff`` and the resulting
    mode occupation ``n_m``; they replace gamma and n_m^T in the spectra.
    """
    ge = params.gamma if gamma_eff is None else gamma_eff
    n = baths.n_m_T if n_m is None else n_m
    n_c = baths.n_c_T(params)
    w = TWO_PI * np.asarray(grid_hz, dtype=float)
    den = w**2 + (ge / 2) ** 2
    lor = ge / den
    ba = 16.0 * G**2 / (den * params.kappa)
    peaks = [(0.0, ge / TWO_PI)]
    extra = dict(C=float(cooperativity(G, params.kappa, params.gamma)),
                 gamma_eff_hz=ge / TWO_PI, n_m=float(n))
    s_x = SpectrumTrace.from_components(
        grid_hz, {"vacuum": 0.5 * lor, "thermal": n * lor}, ROTATING,
        _meta(Regime.BAE, params, "S_X", peaks, **extra))
    s_p = SpectrumTrace.from_components(
        grid_hz, {"vacuum": 0.5 * lor, "thermal": n * lor, "qba": 0.5 * ba,
                  "classical": n_c * ba}, ROTATING,
        _meta(Regime.BAE, params, "S_P", peaks, **extra))
    return s_x, s_p


def output_prefactor(params: SystemParams, G):
    """4 C gamma kappa_e / kappa, equal to 16 G^2 kappa_e / kappa^2."""
    return 16.0 * G**2 * params.kappa_e / params.kappa**2


def output_spectrum_bae(grid_hz, params: SystemParams, G, baths: BathState, chain=None,
                        gamma_eff=None, n_m=None) -> SpectrumTrace:
    """Output-port PSD with the mechanical Lorentzian on top of the noise floor.

    Booking: vacuum = signal vacuum + incoming vacuum (1/2), thermal = signal
    thermal part, classical = cavity noise 4 kappa_e n_c^T / kappa.  A
    ``chain`` (gain_A, n_add) scales everything by A and adds ``A n_add`` as
    ``floor``.
    """
    s_x, _ = spectrum_quadratures_bae(grid_hz, params, G, baths, gamma_eff, n_m)
    pref = output_prefactor(params, G)
    n_c = baths.n_c_T(params)
    ones = np.ones_like(s_x.total)
    comps = {
        "vacuum": pref * s_x.components["vacuum"] + 0.5 * ones,
        "thermal": pref * s_x.components["thermal"],
        "classical": 4.0 * params.kappa_e / params.kappa * n_c * ones,
    }
    md = dict(s_x.metadata, quantity="S_out", prefactor=pref)
    tr = SpectrumTrace.from_components(grid_hz, comps, ROTATING, md)
    if chain is not None:
        tr = tr.scaled(chain.gain_A, chain.gain_A * chain.n_add)
        tr.metadata.update(gain_A=chain.gain_A, n_add=chain.n_add)
    return tr


# --- integration ----------------------------------------------------------------

@dataclass(frozen=True)
class Integral:
    value: float
    error: float


def _lorentz_tail(f_edge, y_edge, center, fwhm, side):
    h = fwhm / 2.0
    K = y_edge * ((f_edge - center) ** 2 + h**2)
    a = math.atan((f_edge - center) / h)
    if side < 0:
        return K / h * (a + math.pi / 2)
    return K / h * (math.pi / 2 - a)


def _trapz(y, x):
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def integrate_spectrum(trace: SpectrumTrace, band=None, tail_model="none",
                       component="total") -> Integral:
    """Integrate a trace over frequency (Hz), optionally adding Lorentzian tails.

    With ``tail_model='lorentzian'`` the grid is split between the peaks in
    ``trace.metadata['peaks']`` (nearest center), and beyond each segment edge
    the trace is continued as a Lorentzian of the listed width matched to the
    edge value.  The error estimate combines a step-halving comparison with
    the change in the tail when matched one point further in.
    """
    if tail_model not in ("none", "lorentzian"):
        raise ValueError(f"unknown tail model {tail_model!r}")
    f = trace.freq_hz
    y = trace.component(component)
    if band is not None:
        lo, hi = band
        if lo < f[0] or hi > f[-1] or not lo < hi:
            raise ValueError(f"band {band} outside grid [{f[0]}, {f[-1]}]")
        m = (f >= lo) & (f <= hi)
        f, y = f[m], y[m]
    if f.size < 3:
        raise ValueError("need at least 3 grid points to integrate")
    if not np.any(y):
        return Integral(0.0, 0.0)

    peaks = trace.peaks
    if tail_model == "lorentzian" and not peaks:
        raise ValueError("lorentzian tails need metadata['peaks']")
    if peaks:
        centers = np.array([c for c, _ in peaks])
        owner = np.argmin(np.abs(f[:, None] - centers[None, :]), axis=1)
    else:
        owner = np.zeros(f.size, dtype=int)

    value = err = 0.0
    for k in np.unique(owner):
        idx = np.flatnonzero(owner == k)
        fs, ys = f[idx], y[idx]
        if fs.size < 3:
            continue
        seg = _trapz(ys, fs)
        if fs.size % 2:
            coarse = _trapz(ys[::2], fs[::2])
        else:
            coarse = _trapz(ys[:-1:2], fs[:-1:2]) + _trapz(ys[-2:], fs[-2:])
        value += seg
        err += abs(seg - coarse) / 3.0
        if tail_model == "lorentzian":
            c, w = peaks[k]
            lt = _lorentz_tail(fs[0], ys[0], c, w, -1)
            rt = _lorentz_tail(fs[-1], ys[-1], c, w, +1)
            lt2 = _lorentz_tail(fs[1], ys[1], c, w, -1) - _trapz(ys[:2], fs[:2])
            rt2 = _lorentz_tail(fs[-2], ys[-2], c, w, +1) - _trapz(ys[-2:], fs[-2:])
            value += lt + rt
            err += abs(lt - lt2) + abs(rt - rt2)
    return Integral(float(value), float(err))


# --- variances ------------------------------------------------------------------

@dataclass(frozen=True)
class VarianceReport:
    """Variances in quanta, split into vacuum/thermal/qba/classical_ba.

    ``components`` maps each quadrature name (``x``/``p`` or ``X``/``P``) to
    its decomposition.  Sideband cooling adds ``qba_eff`` and ``n_m``.
    """

    regime: Regime
    components: dict
    n_qba: float
    qba_eff: Optional[float] = None
    n_m: Optional[float] = None

    def __post_init__(self):
        for q, parts in self.components.items():
            for name, v in parts.items():
                if v < 0:
                    raise ValueError(f"negative {name} contribution to <{q}^2>")

    def variance(self, quadrature):
        return float(sum(self.components[quadrature].values()))

    @property
    def totals(self):
        return {q: self.variance(q) for q in self.components}

    def as_dict(self):
        return {"regime": self.regime.value, "components": self.components,
                "totals": self.totals, "n_qba": self.n_qba,
                "qba_eff": self.qba_eff, "n_m": self.n_m}


def _check_C(C):
    if not C >= 0:
        raise ValueError("cooperativity must be >= 0")


def variance_bad_cavity(C, n_m_T, n_c_T) -> VarianceReport:
    _check_C(C)
    parts = {"vacuum": 0.5, "thermal": n_m_T, "qba": C, "classical_ba": 2 * C * n_c_T}
    return VarianceReport(Regime.BAD_CAVITY, {"x": dict(parts), "p": dict(parts)}, n_qba=C)


def sideband_cooled_occupation(C, n_m_T, n_c_T):
    """n_m = (gamma/gamma_eff) n_m^T + n_c^T with gamma_eff = gamma (1 + C)."""
    return n_m_T / (1.0 + C) + n_c_T


def variance_good_cavity(C, n_m_T, n_c_T) -> VarianceReport:
    _check_C(C)
    r = 1.0 / (1.0 + C)
    parts = {"vacuum": 0.5 * r, "thermal": n_m_T * r, "qba": C * 0.5 * r,
             "classical_ba": C * n_c_T * r}
    return VarianceReport(Regime.RED_SIDEBAND, {"x": dict(parts), "p": dict(parts)},
                          n_qba=C / 2.0, qba_eff=C / (2.0 * (1.0 + C)),
                          n_m=sideband_cooled_occupation(C, n_m_T, n_c_T))


def variance_bae(C, n_m_T, n_c_T, C_cool=0.0) -> VarianceReport:
    """Quadrature variances under two-tone BAE pumping.

    ``C_cool`` is the cooperativity of an auxiliary red-detuned cooling tone
    (gamma_eff = gamma (1 + C_cool)).  It sideband-cools both quadratures and
    dilutes the P backaction by gamma/gamma_eff.  ``n_c_T`` is used for both
    tones.
    """
    _check_C(C)
    _check_C(C_cool)
    cooled = variance_good_cavity(C_cool, n_m_T, n_c_T).components["x"]
    r = 1.0 / (1.0 + C_cool)
    comps = {
        "X": dict(cooled),
        "P": {"vacuum": cooled["vacuum"], "thermal": cooled["thermal"],
              "qba": cooled["qba"] + 2 * C * r,
              "classical_ba": cooled["classical_ba"] + 4 * C * n_c_T * r},
    }
    n_m = sideband_cooled_occupation(C_cool, n_m_T, n_c_T) if C_cool else None
    return VarianceReport(Regime.BAE, comps, n_qba=C, n_m=n_m)


def backaction_occupancy(regime, C):
    """Quantum backaction occupancy n_qba for a regime at cooperativity C.

    Bad cavity: C; red-sideband: C/2; BAE: C, all of it (2C) on the P
    quadrature.  See :func:`bae_quadrature_split`.
    """
    _check_C(C)
    try:
        regime = Regime(regime)
    except ValueError:
        raise RegimeError(f"unknown regime {regime!r}") from None
    if regime is Regime.RED_SIDEBAND:
        return C / 2
    return C


def bae_quadrature_split(C):
    """Quantum backaction per quadrature in the BAE regime."""
    _check_C(C)
    return {"X": 0 * C, "P": 2 * C}


def output_flux_bae(C, gamma, kappa_e, kappa, X2):
    """Photon flux of the mechanical peak, 4 C gamma kappa_e / kappa <X^2>."""
    for name, v in (("gamma", gamma), ("kappa_e", kappa_e), ("kappa", kappa)):
        if not v > 0:
            raise ValueError(f"{name} must be > 0")
    return 4.0 * C * gamma * kappa_e / kappa * X2
