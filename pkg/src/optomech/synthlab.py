"""Synthetic "measured" spectra and sweeps for exercising the calibration chain.

A measured trace is ``A (S_out + n_add)`` multiplied bin by bin by a
Gamma(N, 1/N) variate: the mean of N exponential periodograms, so the relative
scatter per bin is 1/sqrt(N).  ``n_avg=None`` returns the noiseless trace.

Each sweep point draws from its own stream, spawned from the master seed, so
serial and threaded generation give bit-identical output.

Sweep configs are plain dicts (JSON files on disk).  Keys the experimenter
would not know (pump line loss ``J``, chain gain and noise, heating,
thermal-decoupling floor, true cooperativities and occupations) end up in
``SweepDataset.truth`` and never in the blind view.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from ._parallel import pmap
from .constants import HBAR, K_B, TWO_PI
from .errors import ConfigurationError, DataFormatError
from .model import (BathState, Regime, SystemParams, bose_occupation, config_from_dict,
                    config_to_dict, coupling_for_cooperativity, params_hash)
from .spectra import ROTATING, SpectrumTrace, output_spectrum_bae, variance_good_cavity
from .traceio import dump_json, read_trace, write_trace


@dataclass(frozen=True)
class MeasurementChain:
    """Lumped gain (attenuation included) and amplifier added noise in quanta."""

    gain_A: float = 1.0e4
    n_add: float = 0.0

    def __post_init__(self):
        fails = []
        if not (np.isfinite(self.gain_A) and self.gain_A > 0):
            fails.append(f"gain_A must be > 0 (got {self.gain_A!r})")
        if not (np.isfinite(self.n_add) and self.n_add >= 0):
            fails.append(f"n_add must be >= 0 (got {self.n_add!r})")
        if fails:
            raise ConfigurationError(fails)


@dataclass(frozen=True)
class HeatingModel:
    """Phenomenological pump heating, power laws in generator power P.

    n_m^T(P) = n_m^T0 + a_m P^b_m and n_c^T(P) = n_c^T0 + a_c P^b_c.
    """

    a_m: float = 0.0
    b_m: float = 1.0
    a_c: float = 0.0
    b_c: float = 1.0

    def __post_init__(self):
        bad = [k for k in ("a_m", "b_m", "a_c", "b_c") if not getattr(self, k) >= 0]
        if bad:
            raise ConfigurationError([f"heating coefficient {k} must be >= 0" for k in bad])

    def n_m_T(self, n0, P):
        return n0 + self.a_m * np.power(P, self.b_m)

    def n_c_T(self, n0, P):
        return n0 + self.a_c * np.power(P, self.b_c)


@dataclass(frozen=True)
class TraceSettings:
    """Spectrum-analyzer settings: averages, bins and half-span in linewidths."""

    n_avg: Optional[int] = 100
    n_bins: int = 2001
    span_linewidths: float = 20.0
    jitter_hz: float = 0.0

    def __post_init__(self):
        fails = []
        if self.n_avg is not None and not (int(self.n_avg) == self.n_avg and self.n_avg >= 1):
            fails.append("n_avg must be a positive integer or null")
        if not self.n_bins >= 16:
            fails.append("n_bins must be >= 16")
        if not self.span_linewidths > 0:
            fails.append("span_linewidths must be > 0")
        if not self.jitter_hz >= 0:
            fails.append("jitter_hz must be >= 0")
        if fails:
            raise ConfigurationError(fails)

    def grid(self, fwhm_hz):
        half = self.span_linewidths * fwhm_hz
        return np.linspace(-half, half, self.n_bins)


@dataclass(frozen=True)
class Scenario:
    """A single BAE output-spectrum setting.

    ``gamma_eff`` and ``n_m`` describe the auxiliary cooling tone; when None
    the intrinsic linewidth and bath occupation apply.
    """

    params: SystemParams
    G: float
    baths: BathState
    gamma_eff: Optional[float] = None
    n_m: Optional[float] = None
    center_hz: float = 0.0

    @property
    def linewidth(self):
        return self.params.gamma if self.gamma_eff is None else self.gamma_eff


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _apply_noise(ideal: SpectrumTrace, n_avg, rng, metadata):
    if n_avg is None:
        return replace(ideal, metadata=metadata)
    noise = rng.gamma(float(n_avg), 1.0 / n_avg, size=ideal.total.shape)
    return SpectrumTrace(ideal.freq_hz, ideal.total * noise, {}, ideal.frame, metadata)


def synth_output_trace(scenario: Scenario, chain: MeasurementChain, seed,
                       settings: TraceSettings = TraceSettings()) -> SpectrumTrace:
    """Noisy detected BAE output spectrum, A (S_out + n_add), on a uniform grid."""
    rng = _rng(seed)
    grid = settings.grid(scenario.linewidth / TWO_PI)
    ideal = output_spectrum_bae(grid - scenario.center_hz, scenario.params, scenario.G,
                                scenario.baths, chain, scenario.gamma_eff, scenario.n_m)
    ideal = replace(ideal, freq_hz=grid)
    md = dict(ideal.metadata) if settings.n_avg is None else _blind_meta(scenario.params, "S_out")
    md["n_avg"] = settings.n_avg
    return _apply_noise(ideal, settings.n_avg, rng, md)


def red_sideband_output(grid_hz, params: SystemParams, gamma_opt, n_m, n_c_T,
                        chain: Optional[MeasurementChain] = None, center_hz=0.0):
    """Output PSD near the cavity under red-sideband pumping (emulation only).

    Floor 1/2 + 4 kappa_e n_c^T / kappa plus the anti-Stokes Lorentzian
    (kappa_e/kappa) gamma_opt n_m gamma_eff / (w^2 + (gamma_eff/2)^2), whose
    integral is the emitted flux (kappa_e/kappa) gamma_opt n_m.  Noise
    interference between cavity and mechanics is neglected.
    """
    ge = params.gamma + gamma_opt
    w = TWO_PI * (np.asarray(grid_hz, dtype=float) - center_hz)
    lor = ge / (w**2 + (ge / 2) ** 2)
    ratio = params.kappa_e / params.kappa
    ones = np.ones_like(w)
    comps = {"vacuum": 0.5 * ones,
             "thermal": ratio * gamma_opt * n_m * lor,
             "classical": 4 * ratio * n_c_T * ones}
    md = {"regime": Regime.RED_SIDEBAND.value, "params_hash": params_hash(params),
          "quantity": "S_out", "peaks": [[center_hz, ge / TWO_PI]]}
    tr = SpectrumTrace.from_components(grid_hz, comps, ROTATING, md)
    if chain is not None:
        tr = tr.scaled(chain.gain_A, chain.gain_A * chain.n_add)
    return tr


def _blind_meta(params, quantity):
    return {"params_hash": params_hash(params), "quantity": quantity}


# --- datasets -------------------------------------------------------------------

SWEEP_KINDS = {"pump_sweep": "generator_power", "temperature_sweep": "temperature_K",
               "power_sweep": "generator_power"}


@dataclass(frozen=True)
class SweepDataset:
    """Traces along one sweep axis plus (optionally) the hidden truths.

    ``info`` holds what the experimenter knows: device parameters, spectrum
    settings, and sweep-specific known quantities.  ``truth`` holds everything
    else and is dropped by :meth:`blind`.
    """

    kind: str
    axis: str
    axis_values: np.ndarray
    traces: tuple
    params: SystemParams
    seed: Optional[int]
    info: dict = field(default_factory=dict)
    truth: Optional[dict] = None

    def __post_init__(self):
        object.__setattr__(self, "axis_values", np.asarray(self.axis_values, dtype=float))
        object.__setattr__(self, "traces", tuple(self.traces))
        if len(self.traces) != self.axis_values.size:
            raise ValueError("one trace per axis value required")

    def __len__(self):
        return len(self.traces)

    def blind(self) -> "SweepDataset":
        return replace(self, truth=None)

    def header(self):
        return {"kind": self.kind, "axis": self.axis, "axis_values": self.axis_values,
                "seed": self.seed, "device": config_to_dict(self.params), "info": self.info,
                "n_points": len(self)}


def write_dataset(ds: SweepDataset, directory, include_truth=True):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    dump_json(ds.header(), d / "dataset.json")
    for k, tr in enumerate(ds.traces):
        write_trace(tr, d / f"point_{k}.csv")
    if include_truth and ds.truth is not None:
        dump_json(ds.truth, d / "truth.json")


def read_dataset(directory, with_truth=False) -> SweepDataset:
    d = Path(directory)
    head = d / "dataset.json"
    if not head.is_file():
        raise DataFormatError(head, "dataset header not found")
    try:
        h = json.loads(head.read_text())
        params, _, _ = config_from_dict(h["device"])
        n = int(h["n_points"])
        kind, axis, values = h["kind"], h["axis"], h["axis_values"]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(head, f"malformed dataset header ({exc})") from None
    traces = [read_trace(d / f"point_{k}.csv") for k in range(n)]
    truth = None
    if with_truth and (d / "truth.json").is_file():
        truth = json.loads((d / "truth.json").read_text())
    return SweepDataset(kind, axis, values, traces, params, h.get("seed"), h.get("info", {}), truth)


# --- config parsing -------------------------------------------------------------

_COMMON_KEYS = {"kind", "device", "chain", "spectrum", "temperature_K", "n_I_T", "T_floor_K"}
_KIND_KEYS = {
    "pump_sweep": {"powers", "J"},
    "temperature_sweep": {"temperatures_K", "variant", "C_probe", "gamma_eff_hz"},
    "power_sweep": {"cooperativities", "J", "gamma_eff_hz", "heating"},
}


def _parse_common(cfg, kind):
    fails = []
    unknown = sorted(set(cfg) - _COMMON_KEYS - _KIND_KEYS[kind])
    fails += [f"unknown key {k!r} for {kind}" for k in unknown]
    if "device" not in cfg:
        fails.append("missing 'device' block")
    if fails:
        raise ConfigurationError(fails)
    params, _, _ = config_from_dict(cfg["device"])
    chain = MeasurementChain(**cfg.get("chain", {}))
    settings = TraceSettings(**cfg.get("spectrum", {}))
    n_I = float(cfg.get("n_I_T", 0.0))
    if n_I < 0:
        raise ConfigurationError("n_I_T must be >= 0")
    T_floor = cfg.get("T_floor_K")
    if T_floor is not None and not float(T_floor) > 0:
        raise ConfigurationError("T_floor_K must be > 0 when given")
    return params, chain, settings, n_I, T_floor


def _mode_temperature(T, T_floor):
    return T if T_floor is None else max(T, float(T_floor))


def _child_streams(seed, n):
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in ss.spawn(n)]


def _seed_value(seed):
    if isinstance(seed, np.random.SeedSequence):
        return seed.entropy if not seed.spawn_key else None
    return seed


def _jitter(settings, rng):
    return float(rng.normal(0.0, settings.jitter_hz)) if settings.jitter_hz > 0 else 0.0


def _cooling(params, gamma_eff_hz):
    ge = TWO_PI * float(gamma_eff_hz)
    if not ge >= params.gamma:
        raise ConfigurationError(f"gamma_eff_hz={gamma_eff_hz} is below the intrinsic linewidth")
    return ge, ge / params.gamma - 1.0


def _require(cfg, keys, kind):
    miss = [k for k in keys if k not in cfg]
    if miss:
        raise ConfigurationError([f"{kind}: missing key {k!r}" for k in miss])


def synth_pump_sweep(config, seed) -> SweepDataset:
    """Red-sideband traces versus generator power for the optical-damping calibration.

    Hidden: ``J`` with G^2 = J P (rad^2/s^2 per power unit).
    """
    cfg = dict(config)
    _require(cfg, ("powers", "J", "temperature_K"), "pump_sweep")
    params, chain, settings, n_I, T_floor = _parse_common(cfg, "pump_sweep")
    P = np.asarray(cfg["powers"], dtype=float)
    J = float(cfg["J"])
    if np.any(P < 0) or not J > 0:
        raise ConfigurationError("powers must be >= 0 and J > 0")
    T = _mode_temperature(float(cfg["temperature_K"]), T_floor)
    n_T = bose_occupation(T, params.omega_m)
    n_c = BathState(n_T, n_I).n_c_T(params)
    gamma_opt = 4.0 * J * P / params.kappa
    C = gamma_opt / params.gamma
    n_m = n_T / (1.0 + C) + n_c
    rngs = _child_streams(seed, P.size)

    def point(k):
        rng = rngs[k]
        ge = params.gamma + gamma_opt[k]
        grid = settings.grid(ge / TWO_PI)
        ideal = red_sideband_output(grid, params, gamma_opt[k], n_m[k], n_c, chain,
                                    _jitter(settings, rng))
        md = _blind_meta(params, "S_out")
        md.update(n_avg=settings.n_avg, point=k)
        return _apply_noise(ideal, settings.n_avg, rng, md)

    traces = pmap(point, range(P.size))
    truth = {"J": J, "L": 4 * J / params.kappa, "gain_A": chain.gain_A, "n_add": chain.n_add,
             "C": C, "gamma_opt": gamma_opt, "gamma_eff_hz": (params.gamma + gamma_opt) / TWO_PI,
             "n_m": n_m, "n_m_T": n_T, "n_c_T": n_c}
    info = {"temperature_K": float(cfg["temperature_K"]), "spectrum": asdict(settings)}
    return SweepDataset("pump_sweep", "generator_power", P, traces, params,
                        _seed_value(seed), info, truth)


def synth_temperature_sweep(config, seed) -> SweepDataset:
    """Output traces versus cryostat temperature.

    ``variant='bae'`` (default): BAE probe at cooperativity ``C_probe`` with a
    cooling tone setting the linewidth ``gamma_eff_hz``; the mode quadrature
    energy is the sideband-cooled value at cooling cooperativity
    gamma_eff/gamma - 1.  ``variant='single_tone'``: weak red-sideband probe
    at cooperativity ``C_probe``.  The mode temperature is max(T, T_floor).
    """
    cfg = dict(config)
    _require(cfg, ("temperatures_K",), "temperature_sweep")
    params, chain, settings, n_I, T_floor = _parse_common(cfg, "temperature_sweep")
    temps = np.asarray(cfg["temperatures_K"], dtype=float)
    if temps.size == 0 or np.any(~(temps > 0)):
        raise ConfigurationError("temperatures_K must be a non-empty list of positive values")
    variant = cfg.get("variant", "bae")
    if variant not in ("bae", "single_tone"):
        raise ConfigurationError(f"unknown temperature-sweep variant {variant!r}")
    C_probe = float(cfg.get("C_probe", 10.0))
    if not C_probe > 0:
        raise ConfigurationError("C_probe must be > 0")
    baths = BathState(0.0, n_I)
    n_c = baths.n_c_T(params)
    t_mode = np.array([_mode_temperature(t, T_floor) for t in temps])
    n_T = bose_occupation(t_mode, params.omega_m)
    G = float(coupling_for_cooperativity(C_probe, params.kappa, params.gamma))
    rngs = _child_streams(seed, temps.size)

    if variant == "bae":
        ge, C_cool = _cooling(params, cfg.get("gamma_eff_hz", 2.9))
        X2 = np.array([variance_good_cavity(C_cool, n, n_c).variance("x") for n in n_T])
    else:
        ge, C_cool = params.gamma * (1 + C_probe), C_probe
        X2 = n_T / (1 + C_probe) + n_c

    def point(k):
        rng = rngs[k]
        center = _jitter(settings, rng)
        b = BathState(n_T[k], n_I)
        if variant == "bae":
            sc = Scenario(params, G, b, ge, X2[k] - 0.5, center)
            return synth_output_trace(sc, chain, rng, settings)
        grid = settings.grid(ge / TWO_PI)
        ideal = red_sideband_output(grid, params, ge - params.gamma, X2[k], n_c, chain, center)
        md = _blind_meta(params, "S_out")
        md["n_avg"] = settings.n_avg
        return _apply_noise(ideal, settings.n_avg, rng, md)

    traces = pmap(point, range(temps.size))
    for k, tr in enumerate(traces):
        tr.metadata["point"] = k
    if variant == "bae":
        pref = 4.0 * C_probe * params.gamma * params.kappa_e / params.kappa
    else:
        pref = (params.kappa_e / params.kappa) * (ge - params.gamma)
    # flux = pref * X2; dX2/dn_T = 1/(1+C_cool); n_T ~ k_B T / (hbar omega_m)
    H = chain.gain_A * pref / (1.0 + C_cool) * K_B / (HBAR * params.omega_m)
    truth = {"gain_A": chain.gain_A, "n_add": chain.n_add, "T_floor_K": T_floor,
             "mode_temperature_K": t_mode, "n_m_T": n_T, "n_c_T": n_c, "X2": X2,
             "flux": chain.gain_A * pref * X2, "H": H, "C_cool": C_cool,
             "gamma_eff_hz": ge / TWO_PI}
    info = {"variant": variant, "C_probe": C_probe, "spectrum": asdict(settings)}
    if variant == "bae":
        info["gamma_eff_hz"] = ge / TWO_PI
    return SweepDataset("temperature_sweep", "temperature_K", temps, traces, params,
                        _seed_value(seed), info, truth)


def synth_power_sweep(config, seed) -> SweepDataset:
    """BAE output traces versus generator power at the base temperature.

    The sweep is specified by the true per-tone cooperativities; the axis
    recorded in the dataset is the generator power P = C kappa gamma / (4 J).
    A fixed cooling tone sets the linewidth (``gamma_eff_hz``, default 2.9).
    """
    cfg = dict(config)
    _require(cfg, ("cooperativities", "J", "temperature_K"), "power_sweep")
    params, chain, settings, n_I, T_floor = _parse_common(cfg, "power_sweep")
    C = np.asarray(cfg["cooperativities"], dtype=float)
    J = float(cfg["J"])
    if C.size == 0 or np.any(C < 0) or not J > 0:
        raise ConfigurationError("cooperativities must be >= 0 and J > 0")
    heating = HeatingModel(**cfg.get("heating", {}))
    ge, C_cool = _cooling(params, cfg.get("gamma_eff_hz", 2.9))
    T = _mode_temperature(float(cfg["temperature_K"]), T_floor)
    n_T0 = bose_occupation(T, params.omega_m)
    n_c0 = BathState(n_T0, n_I).n_c_T(params)
    P = C * params.kappa * params.gamma / (4.0 * J)
    n_T = heating.n_m_T(n_T0, P)
    n_c = heating.n_c_T(n_c0, P)
    X2 = np.array([variance_good_cavity(C_cool, a, b).variance("x") for a, b in zip(n_T, n_c)])
    X2_0 = variance_good_cavity(C_cool, n_T0, n_c0).variance("x")
    G = coupling_for_cooperativity(C, params.kappa, params.gamma)
    rngs = _child_streams(seed, C.size)

    def point(k):
        rng = rngs[k]
        b = BathState(n_T[k], n_c[k] * params.kappa / params.kappa_i)
        sc = Scenario(params, float(G[k]), b, ge, X2[k] - 0.5, _jitter(settings, rng))
        tr = synth_output_trace(sc, chain, rng, settings)
        tr.metadata["point"] = k
        return tr

    traces = pmap(point, range(C.size))
    ratio = 4.0 * params.gamma * params.kappa_e / params.kappa
    truth = {"J": J, "L": 4 * J / params.kappa, "C": C, "gain_A": chain.gain_A,
             "n_add": chain.n_add, "heating": asdict(heating), "n_m_T": n_T, "n_c_T": n_c,
             "X2": X2, "X2_0": X2_0, "N": chain.gain_A * ratio * X2_0,
             "flux": chain.gain_A * ratio * C * X2, "C_cool": C_cool, "T_floor_K": T_floor,
             "gamma_eff_hz": ge / TWO_PI}
    info = {"temperature_K": float(cfg["temperature_K"]), "spectrum": asdict(settings)}
    return SweepDataset("power_sweep", "generator_power", P, traces, params,
                        _seed_value(seed), info, truth)


_SYNTH = {"pump_sweep": synth_pump_sweep, "temperature_sweep": synth_temperature_sweep,
          "power_sweep": synth_power_sweep}
SCENARIO_PARTS = ("pump", "temperature", "power")


def synth_scenario(config, seed) -> dict:
    """Pump, temperature and power sweeps sharing one device and chain.

    Top-level keys other than ``kind`` and the three part names are merged
    into each part (part keys win).  Returns ``{part: SweepDataset}``.
    """
    shared = {k: v for k, v in config.items() if k not in SCENARIO_PARTS + ("kind",)}
    missing = [p for p in SCENARIO_PARTS if p not in config]
    if missing:
        raise ConfigurationError([f"scenario: missing part {p!r}" for p in missing])
    streams = np.random.SeedSequence(seed).spawn(len(SCENARIO_PARTS))
    out = {}
    for part, ss in zip(SCENARIO_PARTS, streams):
        sub = {**shared, **config[part]}
        kind = sub.get("kind")
        if kind not in _SYNTH:
            raise ConfigurationError(f"scenario part {part!r}: unknown kind {kind!r}")
        ds = _SYNTH[kind](sub, ss)
        out[part] = replace(ds, seed=seed)
    return out


def synth_from_config(config, seed):
    """Dispatch on ``config['kind']``; scenarios return a dict of datasets."""
    kind = config.get("kind")
    if kind == "scenario":
        return synth_scenario(config, seed)
    if kind not in _SYNTH:
        raise ConfigurationError(f"unknown dataset kind {kind!r}")
    return _SYNTH[kind](config, seed)


def write_synth_output(result, directory):
    """Write a dataset, or a scenario as one sub-directory per part."""
    d = Path(directory)
    if isinstance(result, dict):
        d.mkdir(parents=True, exist_ok=True)
        for part, ds in result.items():
            write_dataset(ds, d / part)
        dump_json({"kind": "scenario", "parts": list(result)}, d / "scenario.json")
    else:
        write_dataset(result, d)
