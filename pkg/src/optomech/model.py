"""Device parameters, pump schemes, bath occupations and derived rates.

All frequencies and rates are stored as angular quantities (rad/s).  The JSON
configuration record uses Hz (``*_hz`` fields); conversion happens only in
:func:`config_to_dict` / :func:`config_from_dict`.
"""

from __future__ import annotations

import enum
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .constants import HBAR, K_B, TWO_PI
from .errors import ConfigurationError, DomainError

logger = logging.getLogger(__name__)

# omega_m / kappa below which a resolved-sideband regime is flagged
GOOD_CAVITY_THRESHOLD = 2.0


class Regime(str, enum.Enum):
    BAD_CAVITY = "BadCavitySingleTone"
    RED_SIDEBAND = "RedSidebandSingleTone"
    BAE = "TwoToneBAE"

    @property
    def needs_good_cavity(self) -> bool:
        return self is not Regime.BAD_CAVITY


@dataclass(frozen=True)
class SystemParams:
    """Static device rates and frequencies, all in rad/s."""

    omega_c: float
    omega_m: float
    kappa_e: float
    kappa_i: float
    gamma: float
    g0: float

    def __post_init__(self):
        failures = [
            f"{name} must be strictly positive (got {getattr(self, name)!r})"
            for name in ("omega_c", "omega_m", "kappa_e", "kappa_i", "gamma", "g0")
            if not (np.isfinite(getattr(self, name)) and getattr(self, name) > 0)
        ]
        if failures:
            raise ConfigurationError(failures)

    @property
    def kappa(self) -> float:
        return self.kappa_e + self.kappa_i

    @property
    def sideband_resolution(self) -> float:
        """omega_m / kappa."""
        return self.omega_m / self.kappa

    @property
    def alpha(self) -> float:
        """Amplitude fraction of the internal loss, sqrt(kappa_i / kappa)."""
        return math.sqrt(self.kappa_i / self.kappa)

    @property
    def beta(self) -> float:
        """Amplitude fraction of the external loss, sqrt(kappa_e / kappa)."""
        return math.sqrt(self.kappa_e / self.kappa)

    @classmethod
    def from_hz(cls, omega_c_hz, omega_m_hz, kappa_e_hz, kappa_i_hz, gamma_hz, g0_hz):
        return cls(
            omega_c=TWO_PI * omega_c_hz,
            omega_m=TWO_PI * omega_m_hz,
            kappa_e=TWO_PI * kappa_e_hz,
            kappa_i=TWO_PI * kappa_i_hz,
            gamma=TWO_PI * gamma_hz,
            g0=TWO_PI * g0_hz,
        )


@dataclass(frozen=True)
class CoolingTone:
    """Auxiliary red-sideband tone detuned by ``delta`` from the sideband."""

    G: float
    delta: float


@dataclass(frozen=True)
class DriveScheme:
    """Active pump regime.

    For :attr:`Regime.RED_SIDEBAND` the detuning must equal ``-omega_m``; use
    :meth:`red_sideband` to build one.  ``theta`` only matters for the BAE
    regime, where it rotates the measured cavity quadrature.
    """

    variant: Regime
    G: float
    delta: float = 0.0
    theta: float = 0.0
    cooling: Optional[CoolingTone] = None

    def __post_init__(self):
        object.__setattr__(self, "variant", Regime(self.variant))
        failures = []
        if not (np.isfinite(self.G) and self.G >= 0):
            failures.append(f"G must be >= 0 (got {self.G!r})")
        if self.cooling is not None:
            if self.variant is not Regime.BAE:
                failures.append("a cooling tone is only supported with TwoToneBAE")
            if self.cooling.G < 0:
                failures.append("cooling.G must be >= 0")
            if self.cooling.delta == 0:
                failures.append("cooling.delta must be nonzero (tones must be incommensurate)")
        if failures:
            raise ConfigurationError(failures)

    @classmethod
    def bad_cavity(cls, G):
        return cls(Regime.BAD_CAVITY, G, delta=0.0)

    @classmethod
    def red_sideband(cls, G, params: SystemParams):
        return cls(Regime.RED_SIDEBAND, G, delta=-params.omega_m)

    @classmethod
    def bae(cls, G, theta=0.0, cooling=None):
        return cls(Regime.BAE, G, theta=theta, cooling=cooling)


@dataclass(frozen=True)
class BathState:
    """Thermal occupations of the mechanical and internal cavity baths."""

    n_m_T: float
    n_I_T: float = 0.0
    temperature: Optional[float] = None

    def __post_init__(self):
        failures = []
        if not self.n_m_T >= 0:
            failures.append(f"n_m_T must be >= 0 (got {self.n_m_T!r})")
        if not self.n_I_T >= 0:
            failures.append(f"n_I_T must be >= 0 (got {self.n_I_T!r})")
        if self.temperature is not None and not self.temperature > 0:
            failures.append(f"temperature must be > 0 K (got {self.temperature!r})")
        if failures:
            raise ConfigurationError(failures)

    @classmethod
    def from_temperature(cls, temperature, params: SystemParams, n_I_T=0.0):
        return cls(bose_occupation(temperature, params.omega_m), n_I_T, temperature)

    def n_c_T(self, params: SystemParams) -> float:
        return cavity_thermal_occupation(self.n_I_T, params.kappa_i, params.kappa)


@dataclass(frozen=True)
class DerivedRates:
    C: float
    gamma_opt: float
    gamma_eff: float
    n_c: Optional[float] = None


@dataclass(frozen=True)
class CheckedConfig:
    """Result of :func:`validate_params`."""

    params: SystemParams
    drive: DriveScheme
    good_cavity: bool
    warnings: tuple = field(default_factory=tuple)


def enhanced_coupling(g0, n_c):
    """Pump-enhanced coupling G = g0 sqrt(n_c)."""
    n_c = np.asarray(n_c, dtype=float)
    if np.any(n_c < 0):
        raise DomainError("pump photon number n_c must be >= 0")
    if not g0 > 0:
        raise DomainError("g0 must be > 0")
    out = g0 * np.sqrt(n_c)
    return float(out) if out.ndim == 0 else out


def _check_rates(**rates):
    for name, value in rates.items():
        if not np.all(np.asarray(value) > 0):
            raise DomainError(f"{name} must be > 0")


def cooperativity(G, kappa, gamma):
    """C = 4 G^2 / (kappa gamma)."""
    _check_rates(kappa=kappa, gamma=gamma)
    return 4.0 * np.square(G) / (kappa * gamma)


def optical_damping(G, kappa, gamma) -> DerivedRates:
    """Optical damping, effective linewidth and cooperativity for coupling G."""
    _check_rates(kappa=kappa, gamma=gamma)
    if G < 0:
        raise DomainError("G must be >= 0")
    gamma_opt = 4.0 * G**2 / kappa
    return DerivedRates(
        C=gamma_opt / gamma,
        gamma_opt=gamma_opt,
        gamma_eff=gamma + gamma_opt,
    )


def coupling_for_cooperativity(C, kappa, gamma):
    """Inverse of :func:`cooperativity`: G giving cooperativity C."""
    _check_rates(kappa=kappa, gamma=gamma)
    if np.any(np.asarray(C) < 0):
        raise DomainError("C must be >= 0")
    return np.sqrt(np.asarray(C) * kappa * gamma) / 2.0


def bose_occupation(T, omega):
    """Bose-Einstein occupation 1/(exp(hbar omega / k_B T) - 1).

    Raises :class:`DomainError` for T <= 0 or omega <= 0 instead of
    returning a limit value.
    """
    T = np.asarray(T, dtype=float)
    omega = np.asarray(omega, dtype=float)
    if np.any(~(T > 0)):
        raise DomainError("temperature must be > 0 K")
    if np.any(~(omega > 0)):
        raise DomainError("omega must be > 0")
    x = HBAR * omega / (K_B * T)
    # expm1 keeps full precision for hbar*omega << k_B*T, the usual case here
    with np.errstate(over="ignore"):
        n = 1.0 / np.expm1(x)
    return float(n) if n.ndim == 0 else n


def cavity_thermal_occupation(n_I_T, kappa_i, kappa):
    """n_c^T = n_I^T kappa_i / kappa."""
    if not (0 < kappa_i <= kappa):
        raise DomainError(f"need 0 < kappa_i <= kappa (got kappa_i={kappa_i}, kappa={kappa})")
    if np.any(np.asarray(n_I_T) < 0):
        raise DomainError("n_I_T must be >= 0")
    return n_I_T * kappa_i / kappa


def validate_params(params: SystemParams, drive: DriveScheme) -> CheckedConfig:
    """Check cross-object invariants and flag sideband-resolution problems."""
    failures = []
    if drive.variant is Regime.RED_SIDEBAND and not math.isclose(
        drive.delta, -params.omega_m, rel_tol=1e-12
    ):
        failures.append(
            f"RedSidebandSingleTone requires delta = -omega_m "
            f"(got {drive.delta / TWO_PI:.6g} Hz, expected {-params.omega_m / TWO_PI:.6g} Hz)"
        )
    if drive.variant is Regime.BAD_CAVITY and drive.delta != 0:
        failures.append("BadCavitySingleTone closed forms assume delta = 0")
    if failures:
        raise ConfigurationError(failures)

    good = params.sideband_resolution >= GOOD_CAVITY_THRESHOLD
    warns = []
    if drive.variant.needs_good_cavity and not good:
        warns.append(
            f"{drive.variant.value} assumes resolved sidebands but omega_m/kappa = "
            f"{params.sideband_resolution:.3g} < {GOOD_CAVITY_THRESHOLD}"
        )
        logger.warning(warns[-1])
    return CheckedConfig(params, drive, good, tuple(warns))


# --- JSON configuration record -------------------------------------------------

CONFIG_FIELDS = (
    "omega_c_hz", "omega_m_hz", "kappa_e_hz", "kappa_i_hz", "gamma_hz", "g0_hz",
    "regime", "G_hz", "delta_hz", "theta_rad", "cooling_G_hz", "cooling_delta_hz",
    "n_m_T", "n_I_T", "temperature_K",
)


def config_to_dict(params: SystemParams, drive: Optional[DriveScheme] = None,
                   bath: Optional[BathState] = None) -> dict:
    d = {
        "omega_c_hz": params.omega_c / TWO_PI,
        "omega_m_hz": params.omega_m / TWO_PI,
        "kappa_e_hz": params.kappa_e / TWO_PI,
        "kappa_i_hz": params.kappa_i / TWO_PI,
        "gamma_hz": params.gamma / TWO_PI,
        "g0_hz": params.g0 / TWO_PI,
    }
    if drive is not None:
        d.update(
            regime=drive.variant.value,
            G_hz=drive.G / TWO_PI,
            delta_hz=drive.delta / TWO_PI,
            theta_rad=drive.theta,
            cooling_G_hz=None if drive.cooling is None else drive.cooling.G / TWO_PI,
            cooling_delta_hz=None if drive.cooling is None else drive.cooling.delta / TWO_PI,
        )
    if bath is not None:
        d.update(n_m_T=bath.n_m_T, n_I_T=bath.n_I_T, temperature_K=bath.temperature)
    return d


def config_from_dict(d: dict):
    """Parse a configuration record into ``(params, drive, bath)``.

    ``drive`` and ``bath`` are None when their fields are absent.  Unknown
    keys are rejected so that typos do not pass silently.
    """
    unknown = sorted(set(d) - set(CONFIG_FIELDS))
    if unknown:
        raise ConfigurationError([f"unknown field {k!r}" for k in unknown])
    missing = [k for k in CONFIG_FIELDS[:6] if k not in d]
    if missing:
        raise ConfigurationError([f"missing field {k!r}" for k in missing])
    try:
        params = SystemParams.from_hz(*(float(d[k]) for k in CONFIG_FIELDS[:6]))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(str(exc)) from exc

    drive = None
    if d.get("regime") is not None:
        try:
            regime = Regime(d["regime"])
        except ValueError:
            raise ConfigurationError(f"unknown regime {d['regime']!r}") from None
        G = TWO_PI * float(d.get("G_hz") or 0.0)
        cooling = None
        if d.get("cooling_G_hz") is not None:
            cooling = CoolingTone(TWO_PI * float(d["cooling_G_hz"]),
                                  TWO_PI * float(d.get("cooling_delta_hz") or 0.0))
        if regime is Regime.RED_SIDEBAND and d.get("delta_hz") is None:
            delta = -params.omega_m
        else:
            delta = TWO_PI * float(d.get("delta_hz") or 0.0)
        drive = DriveScheme(regime, G, delta=delta,
                            theta=float(d.get("theta_rad") or 0.0), cooling=cooling)

    bath = None
    if d.get("temperature_K") is not None:
        T = float(d["temperature_K"])
        if not T > 0:
            raise ConfigurationError(f"temperature_K must be > 0 (got {T})")
        n_m = bose_occupation(T, params.omega_m)
        if d.get("n_m_T") is not None and not math.isclose(float(d["n_m_T"]), n_m, rel_tol=1e-9):
            raise ConfigurationError(
                f"n_m_T={d['n_m_T']} disagrees with Bose occupation {n_m:.6g} at {T} K")
        bath = BathState(n_m, float(d.get("n_I_T") or 0.0), T)
    elif d.get("n_m_T") is not None:
        bath = BathState(float(d["n_m_T"]), float(d.get("n_I_T") or 0.0))
    return params, drive, bath


def params_hash(params: SystemParams) -> str:
    """Short stable digest of the device parameters for trace metadata."""
    blob = json.dumps(config_to_dict(params), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def membrane_device() -> SystemParams:
    """Membrane device parameters (707.4 kHz mode in a 4.517 GHz Cu cavity)."""
    return SystemParams.from_hz(4.517e9, 707.4e3, 145e3, 156e3, 8.8e-3, 10.0)
