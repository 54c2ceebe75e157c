"""Calibration chain from measured spectra to the X-quadrature energy.

Stages, each consuming the previous one's output:

1. pump: optical damping versus generator power gives L (gamma_opt = L P),
   J = L kappa / 4 and C(P) = L P / gamma.
2. temperature: detected flux versus cryostat temperature gives H
   (flux = H T) and per-point bath occupations.
3. bae_flux: flux versus cooperativity in the linear regime gives N
   (flux = N C), and then <X^2>(C) = flux <X^2>_0 / (N C).
4. evasion: <X^2>(C) against the backaction expected without evasion.

Uncertainties are propagated to first order; :func:`monte_carlo_propagate`
offers a sampling cross-check.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2 as chi2_dist

from ._parallel import pmap
from .constants import HBAR, K_B, TWO_PI
from .errors import CalibrationError, FitError
from .fitting import LinearFit, fit_linear_through_origin, fit_lorentzian
from .model import SystemParams, bose_occupation
from .spectra import variance_good_cavity

logger = logging.getLogger(__name__)


# --- stage results --------------------------------------------------------------

@dataclass(frozen=True)
class PumpCalibration:
    L: float            # rad/s per power unit
    L_err: float
    J: float            # rad^2/s^2 per power unit
    J_err: float
    gamma: float
    powers: np.ndarray
    gamma_opt: np.ndarray
    gamma_opt_err: np.ndarray
    used: np.ndarray    # bool mask of points entering the fit
    fit: LinearFit
    warnings: tuple = ()

    def C_of_P(self, P):
        return self.L * np.asarray(P, dtype=float) / self.gamma

    def C_err_of_P(self, P):
        return self.L_err * np.asarray(P, dtype=float) / self.gamma

    def as_dict(self):
        return {"L": self.L, "L_err": self.L_err, "J": self.J, "J_err": self.J_err,
                "L_hz": self.L / TWO_PI, "powers": self.powers,
                "gamma_opt_hz": self.gamma_opt / TWO_PI,
                "gamma_opt_err_hz": self.gamma_opt_err / TWO_PI,
                "C": self.C_of_P(self.powers), "used": self.used,
                "fit": self.fit.as_dict(), "warnings": list(self.warnings)}


@dataclass(frozen=True)
class TemperatureCalibration:
    H: float            # flux per kelvin
    H_err: float
    offset: float       # flux intercept (fitted, fixed or zero)
    offset_err: float
    mode: str
    temperatures: np.ndarray
    flux: np.ndarray
    flux_err: np.ndarray
    n_m_T: np.ndarray
    n_m_T_err: np.ndarray
    bose: np.ndarray
    decoupled: np.ndarray
    in_band: np.ndarray
    fit: LinearFit

    def reference_occupation(self, estimator="high_t_fit", temperature=None):
        """Bath occupation at the operating point, with its uncertainty.

        ``high_t_fit``: the inferred value at the sweep point closest to
        ``temperature`` (lowest point if None).  ``lowest_two``: mean of the
        two lowest-temperature points.
        """
        order = np.argsort(self.temperatures)
        if estimator == "lowest_two":
            if order.size < 2:
                raise CalibrationError("temperature", "lowest_two needs at least two points")
            idx = order[:2]
            return (float(np.mean(self.n_m_T[idx])),
                    float(np.sqrt(np.sum(self.n_m_T_err[idx] ** 2)) / 2))
        if estimator != "high_t_fit":
            raise CalibrationError("temperature", f"unknown reference estimator {estimator!r}")
        if temperature is None:
            k = order[0]
        else:
            k = int(np.argmin(np.abs(self.temperatures - temperature)))
        return float(self.n_m_T[k]), float(self.n_m_T_err[k])

    def as_dict(self):
        return {"H": self.H, "H_err": self.H_err, "offset": self.offset,
                "offset_err": self.offset_err, "mode": self.mode,
                "temperature_K": self.temperatures, "flux": self.flux, "flux_err": self.flux_err,
                "n_m_T": self.n_m_T, "n_m_T_err": self.n_m_T_err, "bose": self.bose,
                "decoupled": self.decoupled, "in_band": self.in_band, "fit": self.fit.as_dict()}


@dataclass(frozen=True)
class BaeFluxCalibration:
    N: float
    N_err: float
    X2_ref: float
    X2_ref_err: float
    C: np.ndarray
    flux: np.ndarray
    flux_err: np.ndarray
    X2: np.ndarray
    X2_err: np.ndarray
    window: np.ndarray  # bool mask of the linear-regime points
    fit: LinearFit

    def as_dict(self):
        return {"N": self.N, "N_err": self.N_err, "X2_ref": self.X2_ref,
                "X2_ref_err": self.X2_ref_err, "C": self.C, "flux": self.flux,
                "flux_err": self.flux_err, "X2": self.X2, "X2_err": self.X2_err,
                "window": self.window, "fit": self.fit.as_dict()}


@dataclass(frozen=True)
class CalibrationResult:
    """The four calibration coefficients with uncertainties."""

    L: float
    J: float
    H: float
    N: float
    X2_ref: float
    errors: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("L", "J", "H", "N", "X2_ref"):
            if not getattr(self, name) >= 0:
                raise CalibrationError("result", f"coefficient {name} is negative")


MODEL_OFFSETS = {"ideal": 0.0, "bad_cavity": 1.0, "good_cavity": 0.5, "bae_P": 2.0}


@dataclass(frozen=True)
class EvasionReport:
    C: np.ndarray
    X2: np.ndarray
    X2_err: np.ndarray
    X2_ref: float
    models: dict        # name -> curve on the C axis
    below: dict         # name -> bool per point (below by more than the error)
    evasion_demonstrated: bool

    def as_dict(self):
        return {"C": self.C, "X2": self.X2, "X2_err": self.X2_err, "X2_ref": self.X2_ref,
                "models": self.models, "below": self.below,
                "evasion_demonstrated": self.evasion_demonstrated}


# --- stages ---------------------------------------------------------------------

def calibrate_pump(points, params: SystemParams):
    """Optical-damping calibration from ``(P, gamma_eff, gamma_eff_err)`` rows.

    Rates in rad/s.  gamma_opt = gamma_eff - gamma; points with negative
    gamma_opt are excluded with a warning.  L is a weighted through-origin
    fit of gamma_opt against P.
    """
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] not in (2, 3):
        raise CalibrationError("pump", "points must be rows of (P, gamma_eff[, err])")
    P, ge = arr[:, 0], arr[:, 1]
    err = arr[:, 2] if arr.shape[1] == 3 else np.full_like(P, np.nan)
    gopt = ge - params.gamma
    used = (gopt >= 0) & (P > 0)
    msgs = []
    if np.any(gopt < 0):
        msgs.append(f"excluded {int(np.sum(gopt < 0))} point(s) with negative optical damping")
        warnings.warn(msgs[-1], RuntimeWarning, stacklevel=2)
    if np.count_nonzero(used) < 2:
        raise CalibrationError("pump", "fewer than 2 usable points")
    weights = None
    if np.all(np.isfinite(err[used])) and np.all(err[used] > 0):
        weights = 1.0 / err[used] ** 2
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            fit = fit_linear_through_origin(P[used], gopt[used], weights)
    except FitError as exc:
        raise CalibrationError("pump", str(exc)) from exc
    L, L_err = fit.slope, fit.slope_err
    if not L > 0:
        raise CalibrationError("pump", f"non-positive damping slope L = {L:.4g}")
    return PumpCalibration(L, L_err, L * params.kappa / 4, L_err * params.kappa / 4,
                           params.gamma, P, gopt, err, used, fit, tuple(msgs))


def occupation_scale(params: SystemParams):
    """k_B / (hbar omega_m): occupation per kelvin in the classical limit."""
    return K_B / (HBAR * params.omega_m)


def calibrate_temperature_sweep(points, params: SystemParams, fit_band_K=(0.2, 0.5),
                                mode="cooling_offset", offset_quanta=None, decoupling_sigma=3.0):
    """Flux-versus-temperature calibration from ``(T, flux, flux_err)`` rows.

    flux = H (T + T0) is fitted to the points inside ``fit_band_K`` and
    inverted per point to n_m^T = flux / H k_B / (hbar omega_m) - q, where
    q is an occupation offset:

    ``origin``
        T0 = 0, q = 0: strict proportionality.  Biased whenever the detected
        quadrature carries a sizable temperature-independent part.
    ``intercept``
        T0 fitted freely, q = 1/2.  Unbiased but the extrapolation to low T
        is noisy.
    ``cooling_offset`` (default)
        T0 fixed from ``offset_quanta`` (temperature-independent quanta in
        the detected quadrature, in units of the bath occupation, e.g.
        1/2 + C_cool (1/2 + n_c^T) under sideband cooling) and q equal to it.

    Points whose inferred occupation exceeds the Bose value by more than
    ``decoupling_sigma`` standard errors are flagged as decoupled.
    """
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] not in (2, 3):
        raise CalibrationError("temperature", "points must be rows of (T, flux[, err])")
    T, flux = arr[:, 0], arr[:, 1]
    ferr = arr[:, 2] if arr.shape[1] == 3 else np.full_like(T, np.nan)
    lo, hi = fit_band_K
    band = (T >= lo) & (T <= hi)
    if np.count_nonzero(band) < 2:
        raise CalibrationError("temperature",
                               f"fewer than 2 points in the fit band {lo}-{hi} K")
    weights = None
    if np.all(np.isfinite(ferr[band])) and np.all(ferr[band] > 0):
        weights = 1.0 / ferr[band] ** 2
    scale = occupation_scale(params)
    if mode == "cooling_offset" and offset_quanta is None:
        raise CalibrationError("temperature", "cooling_offset mode needs offset_quanta")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            if mode == "origin":
                fit = fit_linear_through_origin(T[band], flux[band], weights)
                H, H_err, b, b_err, q = fit.slope, fit.slope_err, 0.0, 0.0, 0.0
            elif mode == "intercept":
                fit = fit_linear_through_origin(T[band], flux[band], weights, intercept=True)
                H, H_err, b, b_err, q = fit.slope, fit.slope_err, fit.intercept, fit.intercept_err, 0.5
            elif mode == "cooling_offset":
                T0 = (offset_quanta - 0.5) / scale
                fit = fit_linear_through_origin(T[band] + T0, flux[band], weights)
                H, H_err = fit.slope, fit.slope_err
                b, b_err, q = H * T0, H_err * T0, 0.5
            else:
                raise CalibrationError("temperature", f"unknown mode {mode!r}")
    except FitError as exc:
        raise CalibrationError("temperature", str(exc)) from exc
    if not H > 0:
        raise CalibrationError("temperature", f"non-positive flux slope H = {H:.4g}")

    n = (flux - b) / H * scale - q
    # first order in flux, H and (for free intercepts) b
    dn_dflux = scale / H
    var = (dn_dflux * np.nan_to_num(ferr)) ** 2 + ((flux - b) * scale / H**2 * H_err) ** 2
    if mode == "intercept":
        cov = fit.covariance
        # n = (flux - b) s / H: include the slope/intercept covariance
        g_H = -(flux - b) * scale / H**2
        g_b = -scale / H
        var = (dn_dflux * np.nan_to_num(ferr)) ** 2 + g_H**2 * cov[0, 0] + g_b**2 * cov[1, 1] \
            + 2 * g_H * g_b * cov[0, 1]
    n_err = np.sqrt(var)
    bose = bose_occupation(T, params.omega_m)
    decoupled = (n - bose) > decoupling_sigma * np.where(n_err > 0, n_err, np.inf)
    return TemperatureCalibration(H, H_err, b, b_err, mode, T, flux, ferr, n, n_err, bose,
                                  decoupled, band, fit)


def _window_fit(C, flux, ferr):
    w = 1.0 / ferr**2 if np.all(ferr > 0) and np.all(np.isfinite(ferr)) else None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return fit_linear_through_origin(C, flux, w)


def find_linear_window(C, flux, flux_err, max_chi2_red=2.0, min_points=3, p_min=0.01):
    """Largest low-C prefix consistent with flux = N C.

    A prefix is accepted when its through-origin fit has reduced chi-square
    <= ``max_chi2_red`` or a chi-square p-value >= ``p_min``.  The p-value
    clause matters for short prefixes: with 2 degrees of freedom a fixed
    threshold of 2 rejects 13% of exactly linear data.
    """
    order = np.argsort(C)
    best = None
    for k in range(min_points, C.size + 1):
        idx = order[:k]
        fit = _window_fit(C[idx], flux[idx], flux_err[idx])
        p = chi2_dist.sf(fit.chi2_red * fit.dof, fit.dof) if fit.dof > 0 else 0.0
        if fit.chi2_red <= max_chi2_red or p >= p_min:
            best = idx
    if best is None:
        raise CalibrationError("bae_flux",
                               f"no linear regime: no prefix of >= {min_points} lowest-C points "
                               f"fits flux = N C with reduced chi-square <= {max_chi2_red}")
    mask = np.zeros(C.size, dtype=bool)
    mask[best] = True
    return mask


def calibrate_bae_flux(points, X2_ref, linear_window="auto", X2_ref_err=0.0,
                       max_chi2_red=2.0, min_points=3):
    """Flux-versus-cooperativity calibration from ``(C, flux, flux_err)`` rows.

    ``linear_window`` is ``'auto'`` (see :func:`find_linear_window`), a
    ``(C_min, C_max)`` pair, or a boolean mask.  Returns N and
    <X^2>(C) = flux X2_ref / (N C) for every point.
    """
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise CalibrationError("bae_flux", "points must be rows of (C, flux, flux_err)")
    if not X2_ref > 0:
        raise CalibrationError("bae_flux", "X2_ref must be > 0")
    C, flux, ferr = arr.T
    if np.any(C <= 0):
        raise CalibrationError("bae_flux", "cooperativities must be > 0")
    if isinstance(linear_window, str):
        if linear_window != "auto":
            raise CalibrationError("bae_flux", f"unknown window {linear_window!r}")
        mask = find_linear_window(C, flux, ferr, max_chi2_red, min_points)
    elif np.asarray(linear_window).dtype == bool:
        mask = np.asarray(linear_window, dtype=bool)
    else:
        lo, hi = linear_window
        mask = (C >= lo) & (C <= hi)
    if np.count_nonzero(mask) < 2:
        raise CalibrationError("bae_flux", "fewer than 2 points in the linear window")
    try:
        fit = _window_fit(C[mask], flux[mask], ferr[mask])
    except FitError as exc:
        raise CalibrationError("bae_flux", str(exc)) from exc
    N, N_err = fit.slope, fit.slope_err
    if not N > 0:
        raise CalibrationError("bae_flux", f"non-positive flux slope N = {N:.4g}")
    X2 = flux * X2_ref / (N * C)
    rel = np.sqrt((ferr / flux) ** 2 + (N_err / N) ** 2)
    return BaeFluxCalibration(N, N_err, X2_ref, X2_ref_err, C, flux, ferr, X2,
                              np.abs(X2) * rel, mask, fit)


def evaluate_bae_evasion(C, X2, X2_ref, X2_err=None) -> EvasionReport:
    """Compare <X^2>(C) with X2_ref + {0, C, C/2, 2C}.

    A point is below a model when it lies under the curve by more than its
    uncertainty.  Evasion is demonstrated when every point is below the
    smallest backaction curve, X2_ref + C/2.
    """
    C = np.asarray(C, dtype=float)
    X2 = np.asarray(X2, dtype=float)
    err = np.zeros_like(X2) if X2_err is None else np.asarray(X2_err, dtype=float)
    models = {name: X2_ref + k * C for name, k in MODEL_OFFSETS.items()}
    below = {name: X2 < curve - err for name, curve in models.items() if name != "ideal"}
    ok = bool(np.all(below["good_cavity"])) and C.size > 0
    return EvasionReport(C, X2, err, X2_ref, models, below, ok)


# --- uncertainty helpers --------------------------------------------------------

def delta_method(fn, x, cov, eps=1e-6):
    """First-order propagation: returns (fn(x), sqrt(g^T cov g))."""
    x = np.asarray(x, dtype=float)
    f0 = fn(x)
    g = np.empty(x.size)
    for i in range(x.size):
        h = eps * max(abs(x[i]), 1e-300)
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (fn(xp) - fn(xm)) / (2 * h)
    return float(f0), float(math.sqrt(max(g @ np.asarray(cov) @ g, 0.0)))


def monte_carlo_propagate(fn, x, cov, n=4000, seed=0):
    """Sampling cross-check of :func:`delta_method`: (mean, std) of fn."""
    rng = np.random.default_rng(seed)
    draws = rng.multivariate_normal(np.asarray(x, dtype=float), np.asarray(cov), size=n)
    vals = np.array([fn(d) for d in draws])
    return float(np.mean(vals)), float(np.std(vals, ddof=1))


# --- end-to-end pipeline --------------------------------------------------------

PIPELINE_DEFAULTS = {
    "n_c_T": 0.0,
    "temperature_band_K": [0.2, 0.5],
    "temperature_mode": "cooling_offset",
    "reference_estimator": "high_t_fit",
    "linear_window": "auto",
    "max_chi2_red": 2.0,
    "snr_threshold": 5.0,
    "decoupling_sigma": 3.0,
}


def pipeline_settings(config=None):
    cfg = dict(PIPELINE_DEFAULTS)
    unknown = sorted(set(config or {}) - set(cfg))
    if unknown:
        from .errors import ConfigurationError
        raise ConfigurationError([f"unknown pipeline key {k!r}" for k in unknown])
    cfg.update(config or {})
    return cfg


def fit_dataset(ds, snr_threshold=5.0):
    """Lorentzian fit of every trace; failures become CalibrationError."""
    def one(k):
        try:
            return fit_lorentzian(ds.traces[k], snr_threshold=snr_threshold)
        except FitError as exc:
            raise CalibrationError(ds.kind, f"point {k}: {exc}") from exc
    return pmap(one, range(len(ds)))


@dataclass(frozen=True)
class PipelineReport:
    pump: PumpCalibration
    temperature: TemperatureCalibration
    bae_flux: BaeFluxCalibration
    evasion: EvasionReport
    result: CalibrationResult
    linewidth_hz: np.ndarray
    linewidth_err_hz: np.ndarray
    settings: dict

    def as_dict(self):
        return {
            "pump_calibration": self.pump.as_dict(),
            "temperature_calibration": self.temperature.as_dict(),
            "bae_flux_calibration": self.bae_flux.as_dict(),
            "evasion_report": self.evasion.as_dict(),
            "coefficients": {"L": self.result.L, "J": self.result.J, "H": self.result.H,
                             "N": self.result.N, "X2_ref": self.result.X2_ref,
                             "errors": self.result.errors},
            "settings": self.settings,
        }

    def fig5_rows(self):
        """Rows C, linewidth_hz, flux, X2, model_bad, model_good, model_baeP."""
        ev = self.evasion
        return np.column_stack([ev.C, self.linewidth_hz, self.bae_flux.flux, ev.X2,
                                ev.models["bad_cavity"], ev.models["good_cavity"],
                                ev.models["bae_P"]])


FIG5_COLUMNS = ("C", "linewidth_hz", "flux", "X2", "model_bad", "model_good", "model_baeP")


def _area_rows(ds, fits, stage):
    rows = []
    for k, ft in enumerate(fits):
        if ft.low_confidence:
            logger.warning("%s point %d: low-confidence peak (area/err = %.3g)", stage, k, ft.snr)
        rows.append((ds.axis_values[k], ft.area, ft.errors["area"]))
    return np.array(rows)


def run_pipeline(pump_ds, temperature_ds, power_ds, config=None) -> PipelineReport:
    """Run all four stages on blind datasets.  Raises CalibrationError naming the stage."""
    cfg = pipeline_settings(config)
    params = power_ds.params
    snr = cfg["snr_threshold"]

    # 1. pump: widths -> gamma_opt -> L
    fits = fit_dataset(pump_ds, snr)
    rows = [(P, TWO_PI * ft.linewidth_hz, TWO_PI * ft.errors["linewidth_hz"])
            for P, ft in zip(pump_ds.axis_values, fits)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        pump = calibrate_pump(rows, pump_ds.params)

    # 2. temperature: areas -> H, n_m^T
    tfits = fit_dataset(temperature_ds, snr)
    gw = np.array([TWO_PI * f.linewidth_hz for f in tfits])
    gw_err = np.array([TWO_PI * f.errors["linewidth_hz"] for f in tfits])
    ge_t = _weighted_mean(gw, gw_err)[0]
    C_cool_t = max(ge_t / params.gamma - 1.0, 0.0)
    offset = 0.5 + C_cool_t * (0.5 + cfg["n_c_T"])
    temp = calibrate_temperature_sweep(_area_rows(temperature_ds, tfits, "temperature"),
                                       temperature_ds.params, tuple(cfg["temperature_band_K"]),
                                       cfg["temperature_mode"], offset, cfg["decoupling_sigma"])

    # 3. BAE flux: C from the pump calibration, X2_ref from sideband cooling
    pfits = fit_dataset(power_ds, snr)
    lw = np.array([f.linewidth_hz for f in pfits])
    lw_err = np.array([f.errors["linewidth_hz"] for f in pfits])
    ge, ge_err = _weighted_mean(TWO_PI * lw, TWO_PI * lw_err)
    C_cool = max(ge / params.gamma - 1.0, 0.0)
    n0, n0_err = temp.reference_occupation(cfg["reference_estimator"],
                                           power_ds.info.get("temperature_K"))
    X2_ref = variance_good_cavity(C_cool, max(n0, 0.0), cfg["n_c_T"]).variance("x")
    X2_ref_err = n0_err / (1.0 + C_cool)
    C = pump.C_of_P(power_ds.axis_values)
    frows = np.column_stack([C, [f.area for f in pfits], [f.errors["area"] for f in pfits]])
    window = cfg["linear_window"]
    if not isinstance(window, str):
        window = tuple(window)
    bae = calibrate_bae_flux(frows, X2_ref, window, X2_ref_err, cfg["max_chi2_red"])

    # 4. evasion verdict
    ev = evaluate_bae_evasion(C, bae.X2, X2_ref, bae.X2_err)
    res = CalibrationResult(pump.L, pump.J, temp.H, bae.N, X2_ref,
                            {"L": pump.L_err, "J": pump.J_err, "H": temp.H_err, "N": bae.N_err,
                             "X2_ref": X2_ref_err})
    settings = dict(cfg, gamma_eff_hz=ge / TWO_PI, gamma_eff_err_hz=ge_err / TWO_PI,
                    C_cool=C_cool, n_m_T0=n0, n_m_T0_err=n0_err)
    return PipelineReport(pump, temp, bae, ev, res, lw, lw_err, settings)


def _weighted_mean(x, err):
    x, err = np.asarray(x, dtype=float), np.asarray(err, dtype=float)
    ok = np.isfinite(err) & (err > 0)
    if not np.any(ok):
        return float(np.mean(x)), float("nan")
    w = 1.0 / err[ok] ** 2
    return float(np.sum(w * x[ok]) / np.sum(w)), float(1.0 / np.sqrt(np.sum(w)))


def linewidth_slope(C, linewidth_hz, linewidth_err_hz):
    """Weighted straight-line slope of fitted linewidth against C (free intercept)."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return fit_linear_through_origin(C, linewidth_hz, 1.0 / np.asarray(linewidth_err_hz) ** 2,
                                         intercept=True)
