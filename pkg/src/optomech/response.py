"""Susceptibilities and input-to-output transduction coefficients.

Frame and sign conventions
--------------------------
Fourier convention: every variable goes as ``exp(-i omega t)``, so a damped
mode has susceptibility ``1/(rate/2 - i omega)``.

* Single-tone regimes: the cavity quadratures ``X_c, P_c`` live in the frame
  of the pump, the mechanics ``x, p`` in the lab frame.  Equations of motion::

      (kappa/2 - i w) X_c = -Delta P_c + sqrt(kappa_e) X_c_in + sqrt(kappa_i) X_c_inI
      (kappa/2 - i w) P_c =  Delta X_c - 2G x + sqrt(kappa_e) P_c_in + sqrt(kappa_i) P_c_inI
      (gamma/2 - i w) x   =  omega_m p + sqrt(gamma) x_in
      (gamma/2 - i w) p   = -omega_m x - 2G X_c + sqrt(gamma) p_in

* Two-tone BAE: every variable is a quadrature amplitude, the cavity rotating
  at its own resonance and the mechanics at omega_m::

      dX_c/dt = -kappa/2 X_c + sqrt(kappa_e) X_c_in + sqrt(kappa_i) X_c_inI
      dP_c/dt =  2G X - kappa/2 P_c + sqrt(kappa_e) P_c_in + sqrt(kappa_i) P_c_inI
      dX/dt   = -gamma/2 X + sqrt(gamma) X_in
      dP/dt   = -2G X_c - gamma/2 P + sqrt(gamma) P_in

  The output quadrature is ``P_c_out = sqrt(kappa_e) P_c - P_c_in``.  A pump
  phase ``theta`` only rotates the cavity outputs into the fixed basis.

The closed forms reproduce the published coefficient tables verbatim,
including their phase conventions; they agree with the generic solver in
magnitude (see :func:`approximation_bound`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, RegimeError
from .model import Regime, SystemParams, cooperativity

OUTPUTS = ("x", "p", "X", "P", "X_c", "P_c", "P_c_out")
INPUTS = ("x_in", "p_in", "X_in", "P_in", "X_c_in", "P_c_in", "X_c_inI", "P_c_inI")

MECHANICAL_BATH = "mechanical"
EXTERNAL_BATH = "cavity-external"
INTERNAL_BATH = "cavity-internal"
_BATH_OF = {
    "x_in": MECHANICAL_BATH, "p_in": MECHANICAL_BATH,
    "X_in": MECHANICAL_BATH, "P_in": MECHANICAL_BATH,
    "X_c_in": EXTERNAL_BATH, "P_c_in": EXTERNAL_BATH,
    "X_c_inI": INTERNAL_BATH, "P_c_inI": INTERNAL_BATH,
}


@dataclass(frozen=True)
class ComplexSusceptibilities:
    omega: np.ndarray
    chi_m: np.ndarray
    chi_c: np.ndarray
    chi_m_prime: np.ndarray
    chi_e_prime: np.ndarray


@dataclass(frozen=True)
class NoiseChannelSpec:
    channel: str
    density: float
    bath: str

    def __post_init__(self):
        if self.density < 0.5:
            raise ValueError("a quantum noise input has density >= 1/2")


@dataclass(frozen=True)
class TransductionSet:
    """Coefficients mapping input noise channels to output variables.

    Only nonzero channels are stored; :meth:`get` returns zeros for the rest.
    """

    regime: Regime
    omega: np.ndarray
    coeffs: dict

    def __post_init__(self):
        for out, inp in self.coeffs:
            if out not in OUTPUTS or inp not in INPUTS:
                raise KeyError(f"unknown channel pair {(out, inp)!r}")

    def get(self, output, inp):
        if output not in OUTPUTS or inp not in INPUTS:
            raise KeyError(f"unknown channel pair {(output, inp)!r}")
        c = self.coeffs.get((output, inp))
        if c is None:
            return np.zeros(np.shape(self.omega), dtype=complex)
        return c

    def __getitem__(self, key):
        return self.get(*key)

    @property
    def outputs(self):
        return tuple(dict.fromkeys(out for out, _ in self.coeffs))

    def inputs_of(self, output):
        return tuple(inp for out, inp in self.coeffs if out == output)


def noise_channels(params: SystemParams, baths) -> dict:
    """White input spectral densities 1/2 + n^T for every channel.

    The external cavity bath is at zero temperature.
    """
    occupation = {
        MECHANICAL_BATH: baths.n_m_T,
        EXTERNAL_BATH: 0.0,
        INTERNAL_BATH: baths.n_I_T,
    }
    return {
        ch: NoiseChannelSpec(ch, 0.5 + occupation[bath], bath)
        for ch, bath in _BATH_OF.items()
    }


def susceptibilities(params: SystemParams, gamma_eff, omega) -> ComplexSusceptibilities:
    omega = np.asarray(omega, dtype=float)
    if not np.all(np.isfinite(omega)):
        raise ValueError("frequency grid must be finite")
    g, k, wm = params.gamma, params.kappa, params.omega_m
    return ComplexSusceptibilities(
        omega=omega,
        chi_m=1.0 / (g / 2 - 1j * omega),
        chi_c=1.0 / (k / 2 - 1j * omega),
        chi_m_prime=1.0 / ((g / 2 - 1j * omega) ** 2 + wm**2),
        chi_e_prime=1.0 / ((gamma_eff / 2 - 1j * omega) ** 2 + wm**2),
    )


def _require(regime, expected):
    if Regime(regime) is not expected:
        raise RegimeError(f"operation requires {expected.value}, got {Regime(regime).value}")


def transduction_bad_cavity(omega, params: SystemParams, G, *, delta=0.0,
                            regime=Regime.BAD_CAVITY) -> TransductionSet:
    """Unresolved-sideband coefficients with chi_c = 2/kappa and Delta = 0."""
    _require(regime, Regime.BAD_CAVITY)
    if delta != 0:
        raise RegimeError("bad-cavity closed forms assume zero detuning")
    omega = np.asarray(omega, dtype=float)
    g, wm = params.gamma, params.omega_m
    chi = susceptibilities(params, g, omega).chi_m_prime
    ba = np.sqrt(4.0 * cooperativity(G, params.kappa, g) * g)
    a, b = params.alpha, params.beta
    own_x = 1j * np.sqrt(g) * omega * chi
    cross = np.sqrt(g) * wm * chi
    coeffs = {
        ("x", "x_in"): own_x,
        ("x", "p_in"): cross,
        ("x", "X_c_in"): -ba * b * wm * chi,
        ("x", "X_c_inI"): -ba * a * wm * chi,
        ("p", "p_in"): own_x,
        ("p", "x_in"): -cross,
        ("p", "X_c_in"): 1j * ba * b * omega * chi,
        ("p", "X_c_inI"): 1j * ba * a * omega * chi,
    }
    return TransductionSet(Regime.BAD_CAVITY, omega, coeffs)


def transduction_good_cavity(omega, params: SystemParams, G,
                             regime=Regime.RED_SIDEBAND) -> TransductionSet:
    """Resolved-sideband (Delta = -omega_m) coefficients with the effective linewidth.

    The momentum backaction coefficients are not tabulated in the source
    model; they follow from the same rotating-wave solution as the position
    ones and are checked against :func:`solve_linear_response`.
    """
    _require(regime, Regime.RED_SIDEBAND)
    omega = np.asarray(omega, dtype=float)
    g, wm, k = params.gamma, params.omega_m, params.kappa
    gamma_eff = g + 4.0 * G**2 / k
    chi = susceptibilities(params, gamma_eff, omega).chi_e_prime
    a, b = params.alpha, params.beta
    s = 2.0 * G / np.sqrt(k)
    own = 1j * np.sqrt(g) * omega * chi
    cross = np.sqrt(g) * wm * chi
    coeffs = {
        ("x", "x_in"): own,
        ("x", "p_in"): cross,
        ("x", "X_c_in"): -1j * s * b * wm * chi,
        ("x", "X_c_inI"): -1j * s * a * wm * chi,
        ("x", "P_c_in"): s * b * omega * chi,
        ("x", "P_c_inI"): s * a * omega * chi,
        ("p", "p_in"): own,
        ("p", "x_in"): -cross,
        ("p", "X_c_in"): -s * b * omega * chi,
        ("p", "X_c_inI"): -s * a * omega * chi,
        ("p", "P_c_in"): -1j * s * b * wm * chi,
        ("p", "P_c_inI"): -1j * s * a * wm * chi,
    }
    return TransductionSet(Regime.RED_SIDEBAND, omega, coeffs)


def _rotate_cavity_outputs(coeffs, theta):
    if theta == 0:
        return coeffs
    c, s = np.cos(theta), np.sin(theta)
    out = {k: v for k, v in coeffs.items() if k[0] not in ("X_c", "P_c", "P_c_out")}
    zero = 0.0
    for inp in INPUTS:
        xr = coeffs.get(("X_c", inp), zero)
        pr = coeffs.get(("P_c", inp), zero)
        if np.any(xr != 0) or np.any(pr != 0):
            out[("X_c", inp)] = c * xr - s * pr
            out[("P_c", inp)] = s * xr + c * pr
        po = coeffs.get(("P_c_out", inp))
        if po is not None:
            out[("P_c_out", inp)] = po
    return out


def transduction_bae(omega, params: SystemParams, G, *, exact_cavity=False, theta=0.0,
                     regime=Regime.BAE) -> TransductionSet:
    """Two-tone BAE coefficients in the rotating quadrature frame.

    With ``exact_cavity=False`` the cavity susceptibility is replaced by its
    on-resonance value 2/kappa; ``exact_cavity=True`` keeps chi_c(omega) so
    the approximation error can be measured.  ``theta`` rotates only the
    cavity output basis; the ``P_c_out`` quadrature is given in the measured
    (theta-aligned) basis.
    """
    _require(regime, Regime.BAE)
    omega = np.asarray(omega, dtype=float)
    sus = susceptibilities(params, params.gamma, omega)
    chi_m = sus.chi_m
    chi_c = sus.chi_c if exact_cavity else np.full_like(sus.chi_c, 2.0 / params.kappa)
    ke, ki, g = params.kappa_e, params.kappa_i, params.gamma
    mech = np.sqrt(g) * chi_m
    p_c_x = 2.0 * G * chi_c
    coeffs = {
        ("X", "X_in"): mech,
        ("P", "P_in"): mech,
        ("P", "X_c_in"): -2.0 * G * np.sqrt(ke) * chi_m * chi_c,
        ("P", "X_c_inI"): -2.0 * G * np.sqrt(ki) * chi_m * chi_c,
        ("X_c", "X_c_in"): np.sqrt(ke) * chi_c,
        ("X_c", "X_c_inI"): np.sqrt(ki) * chi_c,
        ("P_c", "X_in"): p_c_x * mech,
        ("P_c", "P_c_in"): np.sqrt(ke) * chi_c,
        ("P_c", "P_c_inI"): np.sqrt(ki) * chi_c,
    }
    coeffs[("P_c_out", "X_in")] = np.sqrt(ke) * coeffs[("P_c", "X_in")]
    coeffs[("P_c_out", "P_c_in")] = ke * chi_c - 1.0
    coeffs[("P_c_out", "P_c_inI")] = np.sqrt(ke * ki) * chi_c
    return TransductionSet(Regime.BAE, omega, _rotate_cavity_outputs(coeffs, theta))


# --- generic frequency-domain solver ------------------------------------------

_SINGLE_TONE_VARS = ("X_c", "P_c", "x", "p")
_BAE_VARS = ("X_c", "P_c", "X", "P")
_SINGLE_TONE_INPUTS = ("X_c_in", "P_c_in", "X_c_inI", "P_c_inI", "x_in", "p_in")
_BAE_INPUTS = ("X_c_in", "P_c_in", "X_c_inI", "P_c_inI", "X_in", "P_in")


@dataclass(frozen=True)
class LinearSystem:
    """dv/dt = M v + B u, with named state and input vectors."""

    M: np.ndarray
    B: np.ndarray
    variables: tuple
    inputs: tuple


def linear_system(regime, params: SystemParams, G, delta=None) -> LinearSystem:
    """Drift and input matrices of the linearized equations of motion.

    ``delta`` defaults to 0 for the bad-cavity regime and ``-omega_m`` for the
    red-sideband regime; any value is accepted for single-tone pumping.
    """
    regime = Regime(regime)
    k, ke, ki = params.kappa, params.kappa_e, params.kappa_i
    g, wm = params.gamma, params.omega_m
    B = np.zeros((4, 6))
    B[0, 0] = B[1, 1] = np.sqrt(ke)
    B[0, 2] = B[1, 3] = np.sqrt(ki)
    B[2, 4] = B[3, 5] = np.sqrt(g)
    if regime is Regime.BAE:
        M = np.array([
            [-k / 2, 0.0, 0.0, 0.0],
            [0.0, -k / 2, 2 * G, 0.0],
            [0.0, 0.0, -g / 2, 0.0],
            [-2 * G, 0.0, 0.0, -g / 2],
        ])
        return LinearSystem(M, B, _BAE_VARS, _BAE_INPUTS)
    if delta is None:
        delta = 0.0 if regime is Regime.BAD_CAVITY else -wm
    M = np.array([
        [-k / 2, -delta, 0.0, 0.0],
        [delta, -k / 2, -2 * G, 0.0],
        [0.0, 0.0, -g / 2, wm],
        [-2 * G, 0.0, -wm, -g / 2],
    ])
    return LinearSystem(M, B, _SINGLE_TONE_VARS, _SINGLE_TONE_INPUTS)


def solve_frequency_domain(M, B, omega, rcond=1e-13):
    """Solve (-i omega I - M) v = B u at each frequency.

    Returns an array of shape (len(omega), n_vars, n_inputs).  Raises
    :class:`NumericalError` when the system is singular at some frequency.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    n = M.shape[0]
    A = -1j * omega[:, None, None] * np.eye(n) - M[None, :, :]
    # reciprocal condition number via singular values; cheap for 4x4 blocks
    sv = np.linalg.svd(A, compute_uv=False)
    rc = sv[:, -1] / sv[:, 0]
    bad = ~(rc > rcond)
    if np.any(bad):
        w = omega[np.argmax(bad)]
        raise NumericalError(f"linear response singular at omega = {w:.6g} rad/s "
                             f"(1/cond = {rc[np.argmax(bad)]:.3g})")
    rhs = np.broadcast_to(B.astype(complex), (len(omega),) + B.shape)
    return np.linalg.solve(A, rhs)


def solve_linear_response(regime, omega, params: SystemParams, G, *, delta=None,
                          theta=0.0) -> TransductionSet:
    """Full transduction matrix from a direct solve of the equations of motion.

    No regime-specific approximation is made: the cavity susceptibility is
    kept exact and, for single-tone pumping, counter-rotating terms are kept.
    Output ``P_c_out = sqrt(kappa_e) P_c - P_c_in``.
    """
    regime = Regime(regime)
    omega = np.asarray(omega, dtype=float)
    sys_ = linear_system(regime, params, G, delta)
    sol = solve_frequency_domain(sys_.M, sys_.B, omega.ravel())
    shape = omega.shape
    coeffs = {}
    for i, var in enumerate(sys_.variables):
        for j, inp in enumerate(sys_.inputs):
            coeffs[(var, inp)] = sol[:, i, j].reshape(shape)
    ip = sys_.variables.index("P_c")
    for j, inp in enumerate(sys_.inputs):
        out = np.sqrt(params.kappa_e) * sol[:, ip, j]
        if inp == "P_c_in":
            out = out - 1.0
        coeffs[("P_c_out", inp)] = out.reshape(shape)
    if regime is Regime.BAE:
        coeffs = _rotate_cavity_outputs(coeffs, theta)
    return TransductionSet(regime, omega, coeffs)


def closed_form(regime, omega, params: SystemParams, G, **kw) -> TransductionSet:
    """Dispatch to the closed-form transduction set of ``regime``."""
    regime = Regime(regime)
    if regime is Regime.BAD_CAVITY:
        return transduction_bad_cavity(omega, params, G, **kw)
    if regime is Regime.RED_SIDEBAND:
        return transduction_good_cavity(omega, params, G, **kw)
    return transduction_bae(omega, params, G, **kw)


def approximation_bound(regime, params: SystemParams, G, omega_max, exact_cavity=False):
    """Documented sup-norm bound on | |closed| - |solver| | / max|solver|.

    * bad cavity: chi_c -> 2/kappa costs (2 w/kappa)^2 and dropping gamma/2
      next to omega costs gamma/omega_m;
    * good cavity: the optical spring shift (kappa/4 omega_m relative to the
      linewidth), cavity filtering of the mechanical sidebands
      (gamma_eff/kappa), counter-rotating scattering (kappa/4 omega_m)^2;
    * BAE with chi_c -> 2/kappa: the direct cavity reflection
      1 - kappa_e chi_c shifts at first order, (2 kappa_e/kappa)(2 w/kappa),
      which relative to the internal-port coefficient 2 sqrt(kappa_e
      kappa_i)/kappa is sqrt(kappa_e/kappa_i) (2 w/kappa); every other
      coefficient moves by (2 w/kappa)^2.  Round-off with exact chi_c.
    """
    regime = Regime(regime)
    k, wm = params.kappa, params.omega_m
    if regime is Regime.BAD_CAVITY:
        return (2.0 * omega_max / k) ** 2 + params.gamma / wm
    if regime is Regime.RED_SIDEBAND:
        gamma_eff = params.gamma + 4.0 * G**2 / k
        return 2.0 * (k / (4.0 * wm) + gamma_eff / k + (k / (4.0 * wm)) ** 2)
    if exact_cavity:
        return 1e-9
    x = 2.0 * omega_max / k
    ratio = np.sqrt(params.kappa_e / params.kappa_i) if params.kappa_i > 0 else np.inf
    return min(ratio, 1.0) * x * (1.0 + x) + 2.0 * x**2


def sup_relative_deviation(a, b):
    """max |(|a| - |b|)| / max |b| over the grid, the metric used for |coefficients|."""
    a, b = np.abs(np.asarray(a)), np.abs(np.asarray(b))
    scale = np.max(b)
    if scale == 0:
        return float(np.max(a))
    return float(np.max(np.abs(a - b)) / scale)


def oracle_deviations(regime, omega, params: SystemParams, G, *, exact_cavity=False,
                      closed=None) -> dict:
    """Per-coefficient sup-norm deviation of a closed form from the direct solve.

    The deviation max | |closed| - |solver| | is normalized by the largest
    solver coefficient of the same output (row), so coefficients that vanish
    for particular parameters (e.g. 2 kappa_e/kappa - 1 at critical
    coupling) stay well defined.  Solver channels the closed form omits count
    with their full magnitude.  ``closed`` may be passed in to check a
    modified coefficient set.
    """
    regime = Regime(regime)
    delta = -params.omega_m if regime is Regime.RED_SIDEBAND else 0.0
    solver = solve_linear_response(regime, omega, params, G, delta=delta)
    if closed is None:
        kw = {"exact_cavity": exact_cavity} if regime is Regime.BAE else {}
        closed = closed_form(regime, omega, params, G, **kw)
    devs = {}
    for out in closed.outputs:
        scale = max(np.max(np.abs(solver.get(out, inp))) for inp in INPUTS)
        for inp in INPUTS:
            diff = np.abs(np.abs(closed.get(out, inp)) - np.abs(solver.get(out, inp)))
            devs[(out, inp)] = float(np.max(diff) / scale) if scale else float(np.max(diff))
    return devs
