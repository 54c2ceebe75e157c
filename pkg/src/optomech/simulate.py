"""Configuration-driven spectrum simulation for a single operating point.

A simulation config is a :func:`~optomech.model.config_from_dict` record
(device, drive and bath) plus optional grid settings.  The result holds the
component-decomposed spectra of the regime, the closed-form variance report
and the numerically integrated variances for comparison.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .constants import TWO_PI
from .errors import ConfigurationError
from .model import (Regime, config_from_dict, config_to_dict, cooperativity,
                    validate_params)
from .spectra import (Integral, SpectrumTrace, VarianceReport, integrate_spectrum, lab_grid,
                      output_spectrum_bae, rotating_grid, spectrum_quadratures_bae,
                      spectrum_x_bad_cavity, spectrum_x_good_cavity, variance_bad_cavity,
                      variance_bae, variance_good_cavity)

GRID_DEFAULTS = {"grid_points": 2**14, "span_linewidths": 64.0}


@dataclass(frozen=True)
class Simulation:
    """Spectra and variances at one operating point.

    ``integrated`` maps each quadrature of ``variance`` to the integral of
    the matching trace, so ``integrated[q].value`` can be checked against
    ``variance.variance(q)``.
    """

    config: dict
    regime: Regime
    C: float
    traces: dict
    variance: VarianceReport
    integrated: dict
    warnings: tuple = field(default=())

    def report(self) -> dict:
        return {
            "config": self.config,
            "regime": self.regime.value,
            "C": self.C,
            "omega_m_hz": self.config["omega_m_hz"],
            "variance": self.variance.as_dict(),
            "integrated": {q: {"value": i.value, "error": i.error}
                           for q, i in self.integrated.items()},
            "traces": sorted(self.traces),
            "warnings": list(self.warnings),
        }


def _grid_settings(config):
    extra = {k: config[k] for k in GRID_DEFAULTS if k in config}
    grid = dict(GRID_DEFAULTS, **extra)
    n, span = grid["grid_points"], grid["span_linewidths"]
    if not (isinstance(n, int) and n >= 64):
        raise ConfigurationError(f"grid_points must be an integer >= 64 (got {n!r})")
    if not (isinstance(span, (int, float)) and span > 2):
        raise ConfigurationError(f"span_linewidths must be > 2 (got {span!r})")
    return int(n), float(span)


def _integrate(trace: SpectrumTrace) -> Integral:
    return integrate_spectrum(trace, tail_model="lorentzian")


def simulate(config: dict) -> Simulation:
    """Build the spectra of the configured regime.

    Parameters
    ----------
    config : dict
        Configuration record.  ``regime`` and a bath (``temperature_K`` or
        ``n_m_T``) are required; ``grid_points`` and ``span_linewidths``
        control the frequency grid.

    Raises
    ------
    ConfigurationError
        For missing or inconsistent fields.
    """
    n_grid, span = _grid_settings(config)
    record = {k: v for k, v in config.items() if k not in GRID_DEFAULTS}
    params, drive, bath = config_from_dict(record)
    if drive is None:
        raise ConfigurationError("simulate needs a 'regime'")
    if bath is None:
        raise ConfigurationError("simulate needs 'temperature_K' or 'n_m_T'")
    checked = validate_params(params, drive)
    regime, G = drive.variant, drive.G
    C = float(cooperativity(G, params.kappa, params.gamma))
    n_T, n_c = bath.n_m_T, bath.n_c_T(params)

    try:
        if regime is Regime.BAD_CAVITY:
            grid = lab_grid(params.omega_m, params.gamma, n_grid, span)
            traces = {"S_x": spectrum_x_bad_cavity(grid, params, G, bath)}
            var = variance_bad_cavity(C, n_T, n_c)
            integrated = {"x": _integrate(traces["S_x"])}
        elif regime is Regime.RED_SIDEBAND:
            grid = lab_grid(params.omega_m, params.gamma * (1.0 + C), n_grid, span)
            traces = {q: spectrum_x_good_cavity(grid, params, G, bath, output=q[-1])
                      for q in ("S_x", "S_p")}
            var = variance_good_cavity(C, n_T, n_c)
            integrated = {q[-1]: _integrate(tr) for q, tr in traces.items()}
        else:
            if drive.theta != 0:
                raise ConfigurationError("simulate supports the measured quadrature "
                                         "theta_rad = 0 only")
            C_cool = 0.0
            if drive.cooling is not None:
                C_cool = float(cooperativity(drive.cooling.G, params.kappa, params.gamma))
            var = variance_bae(C, n_T, n_c, C_cool)
            ge = params.gamma * (1.0 + C_cool)
            n_m = var.variance("X") - 0.5
            grid = rotating_grid(ge / TWO_PI, n_grid, span)
            s_x, s_p = spectrum_quadratures_bae(grid, params, G, bath, ge, n_m)
            s_out = output_spectrum_bae(grid, params, G, bath, None, ge, n_m)
            traces = {"S_X": s_x, "S_P": s_p, "S_out": s_out}
            integrated = {"X": _integrate(s_x), "P": _integrate(s_p)}
    except ValueError as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"grid: {exc}") from None

    echo = config_to_dict(params, drive, bath)
    echo.update(grid_points=n_grid, span_linewidths=span)
    for tr in traces.values():
        tr.metadata.update(omega_m_hz=echo["omega_m_hz"], n_m_T=n_T, n_c_T=n_c)
    return Simulation(echo, regime, C, traces, var, integrated, checked.warnings)
