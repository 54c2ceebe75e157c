"""Lorentzian and straight-line fits used by the calibration pipeline.

The Lorentzian model is

    y(f) = floor + (area / pi) (w / 2) / ((f - f0)^2 + (w / 2)^2)

so that ``area`` is the integral of the peak over f (trace units x Hz) and
``w`` is the FWHM in Hz.  Averaged periodogram bins scatter with standard
deviation mean/sqrt(N), so residuals are weighted by the current model
(iteratively reweighted Gauss-Newton); at convergence this is the maximum
likelihood estimate for Gamma-distributed bins.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import FitError

PARAM_NAMES = ("floor", "area", "center_hz", "linewidth_hz")


def lorentzian_model(f, theta):
    """Evaluate the model at ``theta = (floor, area, f0, w)``."""
    floor, area, f0, w = theta
    h = w / 2.0
    return floor + area / math.pi * h / ((f - f0) ** 2 + h**2)


def lorentzian_jacobian(f, theta):
    """Analytic d model / d theta, shape (len(f), 4)."""
    _, area, f0, w = theta
    h = w / 2.0
    d = f - f0
    den = d**2 + h**2
    J = np.empty((np.size(f), 4))
    J[:, 0] = 1.0
    J[:, 1] = h / (math.pi * den)
    J[:, 2] = area / math.pi * h * 2 * d / den**2
    # d/dw of (h/den) with h = w/2: 0.5 (den - 2 h^2) / den^2
    J[:, 3] = area / math.pi * 0.5 * (d**2 - h**2) / den**2
    return J


def weighted_sse(theta, f, y, sigma):
    """Least-squares objective sum(((y - model) / sigma)^2)."""
    r = (y - lorentzian_model(f, theta)) / sigma
    return float(r @ r)


def weighted_sse_gradient(theta, f, y, sigma):
    """Analytic gradient of :func:`weighted_sse` at fixed sigma."""
    r = (y - lorentzian_model(f, theta)) / sigma
    return -2.0 * (lorentzian_jacobian(f, theta) / sigma[:, None]).T @ r


@dataclass(frozen=True)
class LorentzianFit:
    """Fitted peak.  ``area`` and ``floor`` are in the input trace units."""

    area: float
    linewidth_hz: float
    center_hz: float
    floor: float
    errors: dict
    chi2_red: float
    converged: bool
    low_confidence: bool = False
    n_iter: int = 0
    covariance: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def theta(self):
        return np.array([self.floor, self.area, self.center_hz, self.linewidth_hz])

    @property
    def snr(self):
        e = self.errors.get("area", math.inf)
        return self.area / e if e > 0 else math.inf

    def as_dict(self):
        return {"area": self.area, "linewidth_hz": self.linewidth_hz, "center_hz": self.center_hz,
                "floor": self.floor, "errors": dict(self.errors), "chi2_red": self.chi2_red,
                "converged": self.converged, "low_confidence": self.low_confidence}


def _moment_seeds(f, y):
    """Starting points (floor, area, f0, w) from a robust floor and the excess."""
    n = y.size
    k = max(3, n // 10)
    edge = np.concatenate([y[:k], y[-k:]])
    floor = float(np.median(edge))
    excess = y - floor
    # light smoothing before locating the maximum
    win = max(1, n // 200) * 2 + 1
    sm = np.convolve(excess, np.ones(win) / win, mode="same")
    i = int(np.argmax(sm))
    height = float(sm[i])
    area = float(np.sum(0.5 * (excess[1:] + excess[:-1]) * np.diff(f)))
    span = f[-1] - f[0]
    if height <= 0 or area <= 0:
        return floor, []
    w0 = min(max(2.0 * area / (math.pi * height), 4 * span / n), span / 2)
    pos = np.clip(excess, 0, None)
    f_mean = float(np.sum(pos * f) / np.sum(pos)) if np.any(pos) else f[i]
    seeds = []
    for f0 in (f[i], f_mean):
        for scale in (1.0, 0.5, 2.0):
            w = w0 * scale
            seeds.append(np.array([floor, area, f0, w]))
    return floor, seeds


def _deviance(y, mu):
    """Gamma deviance / 2, sum(r - log1p(r)) with r = (y - mu) / mu.

    Written in r so it stays accurate when the model matches the data to
    rounding level.
    """
    r = (y - mu) / mu
    return float(np.sum(r - np.log1p(r)))


def _gauss_newton(f, y, theta, max_iter, tol, stat_tol=1e-5):
    """Damped, model-weighted Gauss-Newton.  Returns (theta, n_iter, converged).

    Converged when every step is below ``tol`` relative to the parameter (the
    center: relative to the width) or below ``stat_tol`` standard errors;
    the objective is too flat to resolve anything finer on noisy data.
    """
    lam = 1e-3
    mu = lorentzian_model(f, theta)
    cost = _deviance(y, mu)
    for it in range(1, max_iter + 1):
        J = lorentzian_jacobian(f, theta)
        wgt = 1.0 / mu**2
        A = J.T @ (J * wgt[:, None])
        g = J.T @ (wgt * (y - mu))
        scale = np.sqrt(np.diag(A))
        scale[scale == 0] = 1.0
        An = A / np.outer(scale, scale)
        gn = g / scale
        improved = False
        for _ in range(40):
            try:
                step = np.linalg.solve(An + lam * np.eye(4), gn) / scale
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            trial = theta + step
            if trial[3] <= 0:
                lam *= 10
                continue
            mu_t = lorentzian_model(f, trial)
            if np.all(mu_t > 0) and (c := _deviance(y, mu_t)) <= cost:
                improved = True
                break
            lam *= 10
        if not improved:
            return theta, it, True   # no descent direction left: at a minimum
        # parabolic line search along the step; stops the zig-zag that
        # Gauss-Newton shows along the strongly correlated area/width direction
        half = theta + 0.5 * step
        mu_h = lorentzian_model(f, half)
        if half[3] > 0 and np.all(mu_h > 0):
            c_h = _deviance(y, mu_h)
            curv = 2.0 * (c - 2.0 * c_h + cost)
            if curv > 0:
                a = float(np.clip((curv - (c - cost)) / (2.0 * curv), 0.05, 2.0))
                t_a = theta + a * step
                mu_a = lorentzian_model(f, t_a)
                if t_a[3] > 0 and np.all(mu_a > 0) and (c_a := _deviance(y, mu_a)) < c:
                    step, trial, mu_t, c = a * step, t_a, mu_a, c_a
        theta, mu, cost = trial, mu_t, c
        lam = max(lam / 10, 1e-12)
        rel = np.abs(step) / np.maximum(np.abs(theta), 1e-300)
        rel[2] = abs(step[2]) / theta[3]
        try:
            chi2_red = 2.0 * cost / max(f.size - 4, 1)
            sd = np.sqrt(np.abs(np.diag(np.linalg.inv(A))) * chi2_red)
        except np.linalg.LinAlgError:
            sd = np.zeros(4)
        if np.all((rel < tol) | (np.abs(step) < stat_tol * sd)):
            return theta, it, True
    return theta, max_iter, False


def _polish(f, y, theta, max_iter=30):
    """Undamped scoring steps from a converged point down to rounding level.

    Solves the likelihood score equations J^T W (y - mu) = 0 directly rather
    than comparing objective values, which stop resolving changes near
    sqrt(eps).  The fitted parameters then depend smoothly on the data, so
    rescaling a trace moves them only at machine precision.
    """
    prev = np.inf
    for _ in range(max_iter):
        mu = lorentzian_model(f, theta)
        J = lorentzian_jacobian(f, theta)
        wgt = 1.0 / mu**2
        A = J.T @ (J * wgt[:, None])
        try:
            step = np.linalg.solve(A, J.T @ (wgt * (y - mu)))
        except np.linalg.LinAlgError:
            return theta
        size = float(np.max(np.abs(step) / np.array(
            [abs(theta[0]) or 1.0, abs(theta[1]) or 1.0, theta[3], theta[3]])))
        trial = theta + step
        if not (np.all(np.isfinite(trial)) and trial[3] > 0 and size < min(prev, 1e-3)):
            return theta
        mu_t = lorentzian_model(f, trial)
        if not np.all(mu_t > 0):
            return theta
        theta, prev = trial, size
        if size < 1e-15:
            break
    return theta


def fit_lorentzian(trace_or_f, y=None, *, n_avg=None, snr_threshold=5.0, max_iter=200,
                   tol=1e-12) -> LorentzianFit:
    """Fit a single Lorentzian peak on a flat floor.

    Accepts a :class:`SpectrumTrace` or arrays ``(f, y)``.  When ``n_avg`` is
    known (taken from trace metadata if present) the standard errors are
    absolute, otherwise they are scaled by the reduced chi-square.  A peak
    whose area is below ``snr_threshold`` standard errors, or a trace with no
    positive excess, is flagged ``low_confidence``; the latter gets a
    floor-only fit with ``area = 0``.

    Raises :class:`FitError` if no start converges.
    """
    if y is None:
        tr = trace_or_f
        f, y = tr.freq_hz, tr.total
        if n_avg is None:
            n_avg = tr.metadata.get("n_avg")
    else:
        f = trace_or_f
    f = np.asarray(f, dtype=float)
    y = np.asarray(y, dtype=float)
    if f.size < 8 or f.shape != y.shape:
        raise ValueError("need matching f, y arrays with at least 8 points")
    if np.any(~np.isfinite(y)) or np.any(y < 0):
        raise ValueError("trace values must be finite and >= 0")
    # normalize so the fit is independent of the overall trace scale
    norm = float(np.median(y))
    if not norm > 0:
        norm = float(np.max(y)) or 1.0
    yn = y / norm
    yn_safe = np.maximum(yn, 1e-300)

    floor0, seeds = _moment_seeds(f, yn)
    best = None
    for s in seeds:
        theta, it, ok = _gauss_newton(f, yn_safe, s, max_iter, tol)
        if theta[1] <= 0 and best is not None:
            continue
        cost = _deviance(yn_safe, lorentzian_model(f, theta))
        if best is None or (ok and not best[3]) or (ok == best[3] and cost < best[2]):
            best = (theta, it, cost, ok)
    if best is None or best[0][1] <= 0:
        return _floor_only(f, yn, norm, n_avg)
    theta, it, _, ok = best
    if not ok:
        resid = float(np.linalg.norm(yn - lorentzian_model(f, theta)))
        raise FitError("Lorentzian fit did not converge", resid * norm)
    theta = _polish(f, yn_safe, theta)

    mu = lorentzian_model(f, theta)
    J = lorentzian_jacobian(f, theta)
    dof = f.size - 4
    chi2 = float(np.sum(((yn - mu) / mu) ** 2))
    fisher = J.T @ (J / mu[:, None] ** 2)
    try:
        cov = np.linalg.inv(fisher)
    except np.linalg.LinAlgError:
        cov = np.full((4, 4), np.inf)
    if n_avg:
        cov = cov / n_avg
        chi2_red = chi2 * n_avg / dof
    else:
        chi2_red = chi2 / dof
        cov = cov * chi2_red
    scale = np.array([norm, norm, 1.0, 1.0])
    cov = cov * np.outer(scale, scale)
    err = np.sqrt(np.clip(np.diag(cov), 0, None))
    floor, area, f0, w = theta * scale
    errors = dict(zip(PARAM_NAMES, map(float, err)))
    low = not (area > snr_threshold * errors["area"])
    return LorentzianFit(float(area), float(w), float(f0), float(floor), errors, chi2_red,
                         True, low, it, cov)


def _floor_only(f, yn, norm, n_avg):
    floor = float(np.mean(yn))
    sd = float(np.std(yn, ddof=1)) / math.sqrt(yn.size)
    span = float(f[-1] - f[0])
    errors = {"floor": sd * norm, "area": math.inf, "center_hz": math.inf, "linewidth_hz": math.inf}
    r = (yn - floor) / floor
    dof = yn.size - 1
    chi2_red = float(r @ r) * (n_avg or 1) / dof
    return LorentzianFit(0.0, span, float(np.mean(f)), floor * norm, errors, chi2_red,
                         True, True, 0, None)


# --- straight lines -------------------------------------------------------------

@dataclass(frozen=True)
class LinearFit:
    slope: float
    slope_err: float
    intercept: float = 0.0
    intercept_err: float = 0.0
    chi2_red: float = float("nan")
    dof: int = 0
    covariance: Optional[np.ndarray] = field(default=None, repr=False)

    def __call__(self, x):
        return self.slope * np.asarray(x) + self.intercept

    def as_dict(self):
        return {"slope": self.slope, "slope_err": self.slope_err, "intercept": self.intercept,
                "intercept_err": self.intercept_err, "chi2_red": self.chi2_red, "dof": self.dof}


def fit_linear_through_origin(xs, ys, weights=None, *, intercept=False, absolute_sigma=None):
    """Weighted least-squares line, through the origin unless ``intercept``.

    ``weights`` are 1/sigma^2.  With weights the errors are absolute by
    default (``absolute_sigma``); without, they are scaled by the residual
    variance, so an exact line has zero error and a fit with no residual
    degrees of freedom has infinite error.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("xs and ys must be 1-D arrays of equal length")
    if x.size < 2:
        raise FitError("need at least 2 points for a linear fit")
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != x.shape or np.any(~(w >= 0)) or not np.any(w > 0):
        raise ValueError("weights must be non-negative with at least one positive")
    if absolute_sigma is None:
        absolute_sigma = weights is not None
    if x.size == 2:
        warnings.warn("linear fit on two points: no residual degrees of freedom to judge it",
                      RuntimeWarning, stacklevel=2)
    X = np.column_stack([x, np.ones_like(x)]) if intercept else x[:, None]
    A = X.T @ (X * w[:, None])
    if np.linalg.cond(A) > 1e14 or not np.any(x * w != 0):
        raise FitError("singular linear fit (all abscissae zero or degenerate)")
    cov = np.linalg.inv(A)
    beta = cov @ (X.T @ (w * y))
    r = y - X @ beta
    dof = int(np.count_nonzero(w) - X.shape[1])
    chi2 = float(np.sum(w * r**2))
    chi2_red = chi2 / dof if dof > 0 else math.nan
    if not absolute_sigma:
        if dof > 0:
            cov = cov * chi2_red
        else:
            cov = np.full_like(cov, math.inf)
    err = np.sqrt(np.abs(np.diag(cov)))
    if intercept:
        return LinearFit(float(beta[0]), float(err[0]), float(beta[1]), float(err[1]),
                         chi2_red, dof, cov)
    return LinearFit(float(beta[0]), float(err[0]), 0.0, 0.0, chi2_red, dof, cov)
