import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from optomech.constants import HBAR, K_B, TWO_PI
from optomech.errors import ConfigurationError, DomainError
from optomech.model import (BathState, CoolingTone, DriveScheme, Regime, SystemParams,
                            bose_occupation, cavity_thermal_occupation, config_from_dict,
                            config_to_dict, cooperativity, coupling_for_cooperativity,
                            enhanced_coupling, optical_damping, params_hash, validate_params)

# Independent high-precision evaluations (mpmath, 30 digits, CODATA-2018).
BOSE_37MK = 1089.34303382225
BOSE_25MK = 735.880489759821
C_G100 = 15.1011778918756
GOPT_G46 = 0.0288579401993355


def test_constants_are_codata_2018():
    assert HBAR == 1.054571817e-34
    assert K_B == 1.380649e-23


class TestSystemParams:
    def test_kappa_accessor(self, device):
        assert device.kappa == device.kappa_e + device.kappa_i

    def test_from_hz_converts_to_angular(self, device):
        assert device.omega_m == pytest.approx(TWO_PI * 707.4e3, rel=1e-15)
        assert device.kappa / TWO_PI == pytest.approx(301e3, rel=1e-12)

    def test_loss_partition(self, device):
        assert device.alpha**2 + device.beta**2 == pytest.approx(1.0, abs=1e-15)

    def test_internal_to_external_ratio(self, device):
        assert device.alpha / device.beta == pytest.approx(1.0372377109, rel=1e-9)

    @pytest.mark.parametrize("field", ["omega_c", "omega_m", "kappa_e", "kappa_i", "gamma", "g0"])
    def test_rejects_nonpositive(self, field):
        kw = dict(omega_c=1.0, omega_m=1.0, kappa_e=1.0, kappa_i=1.0, gamma=1.0, g0=1.0)
        kw[field] = 0.0
        with pytest.raises(ConfigurationError, match=field):
            SystemParams(**kw)

    def test_lists_every_failure(self):
        with pytest.raises(ConfigurationError) as exc:
            SystemParams(1.0, -1.0, 0.0, 1.0, 1.0, float("nan"))
        assert len(exc.value.failures) == 3

    @given(st.floats(1e-3, 1e9), st.floats(1e-3, 1e9))
    def test_kappa_sum_exact(self, ke, ki):
        p = SystemParams(1.0, 1.0, ke, ki, 1.0, 1.0)
        assert p.kappa == ke + ki


class TestEnhancedCoupling:
    def test_zero_pump(self):
        assert enhanced_coupling(TWO_PI * 10, 0.0) == 0.0

    def test_single_photon(self):
        assert enhanced_coupling(TWO_PI * 10, 1.0) / TWO_PI == pytest.approx(10.0)

    def test_ten_thousand_photons(self):
        assert enhanced_coupling(TWO_PI * 10, 1e4) / TWO_PI == pytest.approx(1000.0, rel=1e-14)

    def test_negative_photon_number(self):
        with pytest.raises(DomainError):
            enhanced_coupling(1.0, -1.0)


class TestCooperativity:
    def test_zero_coupling(self, device):
        assert cooperativity(0.0, device.kappa, device.gamma) == 0.0

    def test_from_optical_damping(self):
        # 90 Hz of optical damping on an 8.8 mHz oscillator
        assert 90.0 / 8.8e-3 == pytest.approx(1.02e4, rel=3e-3)

    def test_membrane_rates(self, device):
        C = cooperativity(TWO_PI * 100.0, device.kappa, device.gamma)
        assert C == pytest.approx(C_G100, rel=1e-12)

    @pytest.mark.parametrize("kappa,gamma", [(0.0, 1.0), (1.0, 0.0), (-1.0, 1.0)])
    def test_bad_rates(self, kappa, gamma):
        with pytest.raises(DomainError):
            cooperativity(1.0, kappa, gamma)

    @given(st.floats(0, 1e6), st.floats(1e-3, 1e8), st.floats(1e-4, 1e3))
    def test_C_gamma_equals_gamma_opt(self, G, kappa, gamma):
        rates = optical_damping(G, kappa, gamma)
        assert rates.C * gamma == pytest.approx(rates.gamma_opt, rel=1e-12, abs=1e-300)
        assert rates.gamma_eff == pytest.approx(gamma + rates.gamma_opt, rel=1e-15)

    @given(st.floats(0, 1e5), st.floats(1e-3, 1e8), st.floats(1e-4, 1e3))
    def test_coupling_inverse(self, C, kappa, gamma):
        G = coupling_for_cooperativity(C, kappa, gamma)
        assert cooperativity(G, kappa, gamma) == pytest.approx(C, rel=1e-12, abs=1e-300)


class TestOpticalDamping:
    def test_zero_coupling(self, device):
        r = optical_damping(0.0, device.kappa, device.gamma)
        assert r.gamma_opt == 0.0 and r.gamma_eff == device.gamma and r.C == 0.0

    def test_reference_cooling_point(self, device):
        G = coupling_for_cooperativity(1.02e4, device.kappa, device.gamma)
        r = optical_damping(G, device.kappa, device.gamma)
        assert r.gamma_opt / TWO_PI == pytest.approx(89.76, rel=1e-12)
        assert r.gamma_opt / TWO_PI == pytest.approx(90.0, rel=0.02)

    def test_direct_evaluation(self, device):
        r = optical_damping(TWO_PI * 46.6, device.kappa, device.gamma)
        assert r.gamma_opt / TWO_PI == pytest.approx(GOPT_G46, rel=1e-12)


class TestBoseOccupation:
    def test_equilibrium_mode_temperature(self):
        assert bose_occupation(0.037, TWO_PI * 707.4e3) == pytest.approx(BOSE_37MK, rel=1e-12)

    def test_base_temperature(self):
        assert bose_occupation(0.025, TWO_PI * 707.4e3) == pytest.approx(BOSE_25MK, rel=1e-12)

    def test_ground_state_limit(self):
        assert bose_occupation(1e-6, TWO_PI * 1e9) == 0.0

    @pytest.mark.parametrize("T", [0.0, -1.0])
    def test_nonpositive_temperature(self, T):
        with pytest.raises(DomainError):
            bose_occupation(T, 1.0)

    def test_vectorized(self):
        n = bose_occupation(np.array([0.025, 0.037]), TWO_PI * 707.4e3)
        assert n == pytest.approx([BOSE_25MK, BOSE_37MK], rel=1e-12)

    @given(st.floats(1e-3, 10.0), st.floats(1.01, 3.0))
    def test_monotone_in_temperature(self, T, factor):
        w = TWO_PI * 707.4e3
        assert bose_occupation(T * factor, w) > bose_occupation(T, w)

    @given(st.floats(1e-3, 10.0), st.floats(1.01, 3.0))
    def test_monotone_decreasing_in_frequency(self, T, factor):
        w = TWO_PI * 707.4e3
        assert bose_occupation(T, w * factor) < bose_occupation(T, w)

    @given(st.floats(100.0, 1e6))
    def test_classical_limit(self, ratio):
        w = TWO_PI * 1e6
        T = ratio * HBAR * w / K_B
        assert bose_occupation(T, w) == pytest.approx(ratio - 0.5, rel=1e-3)


class TestCavityThermalOccupation:
    def test_zero(self, device):
        assert cavity_thermal_occupation(0.0, device.kappa_i, device.kappa) == 0.0

    def test_membrane_rates(self, device):
        n = cavity_thermal_occupation(1.0, device.kappa_i, device.kappa)
        assert n == pytest.approx(156 / 301, rel=1e-12)
        assert n == pytest.approx(0.518, abs=5e-4)

    def test_fully_internal(self):
        assert cavity_thermal_occupation(0.7, 2.0, 2.0) == 0.7

    def test_kappa_i_above_kappa(self):
        with pytest.raises((ConfigurationError, DomainError)):
            cavity_thermal_occupation(1.0, 3.0, 2.0)

    def test_bath_accessor(self, device):
        b = BathState(10.0, 1.0)
        assert b.n_c_T(device) == pytest.approx(156 / 301, rel=1e-12)


class TestBathState:
    def test_negative_occupation(self):
        with pytest.raises(ConfigurationError):
            BathState(-1.0)

    def test_temperature_must_match(self):
        with pytest.raises(ConfigurationError):
            config_from_dict({"omega_c_hz": 4.517e9, "omega_m_hz": 707.4e3, "kappa_e_hz": 145e3,
                              "kappa_i_hz": 156e3, "gamma_hz": 8.8e-3, "g0_hz": 10.0,
                              "temperature_K": 0.037, "n_m_T": 10.0})


class TestDriveScheme:
    def test_negative_coupling(self):
        with pytest.raises(ConfigurationError):
            DriveScheme.bad_cavity(-1.0)

    def test_cooling_needs_detuning(self):
        with pytest.raises(ConfigurationError, match="delta"):
            DriveScheme.bae(1.0, cooling=CoolingTone(1.0, 0.0))

    def test_cooling_only_with_bae(self):
        with pytest.raises(ConfigurationError):
            DriveScheme(Regime.BAD_CAVITY, 1.0, cooling=CoolingTone(1.0, 1.0))

    def test_red_sideband_detuning(self, device):
        d = DriveScheme.red_sideband(1.0, device)
        assert d.delta == -device.omega_m


class TestValidateParams:
    def test_membrane_device_is_good_cavity(self, device):
        checked = validate_params(device, DriveScheme.red_sideband(1.0, device))
        assert checked.good_cavity and not checked.warnings
        assert device.sideband_resolution == pytest.approx(2.35, abs=0.01)

    def test_good_cavity_warning(self):
        p = SystemParams.from_hz(4.517e9, 100e3, 145e3, 156e3, 8.8e-3, 10.0)
        checked = validate_params(p, DriveScheme.red_sideband(1.0, p))
        assert not checked.good_cavity
        assert len(checked.warnings) == 1 and "resolved" in checked.warnings[0]

    def test_wrong_red_sideband_detuning(self, device):
        with pytest.raises(ConfigurationError, match="delta"):
            validate_params(device, DriveScheme(Regime.RED_SIDEBAND, 1.0, delta=0.0))

    def test_bad_cavity_needs_zero_detuning(self, device):
        with pytest.raises(ConfigurationError):
            validate_params(device, DriveScheme(Regime.BAD_CAVITY, 1.0, delta=1.0))


class TestConfigRecord:
    def test_round_trip(self, device):
        drive = DriveScheme.bae(TWO_PI * 36.0, cooling=CoolingTone(TWO_PI * 466.0, TWO_PI * 400.0))
        bath = BathState(bose_occupation(0.037, device.omega_m), 0.386, 0.037)
        d = json.loads(json.dumps(config_to_dict(device, drive, bath)))
        p2, d2, b2 = config_from_dict(d)
        assert p2 == device
        assert d2.variant is Regime.BAE and d2.G == pytest.approx(drive.G, rel=1e-15)
        assert d2.cooling.delta == pytest.approx(TWO_PI * 400.0, rel=1e-15)
        assert b2.n_m_T == pytest.approx(bath.n_m_T, rel=1e-15)

    def test_field_names(self, device):
        d = config_to_dict(device, DriveScheme.bad_cavity(0.0), BathState(1.0))
        assert set(d) == {"omega_c_hz", "omega_m_hz", "kappa_e_hz", "kappa_i_hz", "gamma_hz",
                          "g0_hz", "regime", "G_hz", "delta_hz", "theta_rad", "cooling_G_hz",
                          "cooling_delta_hz", "n_m_T", "n_I_T", "temperature_K"}

    def test_red_sideband_default_detuning(self, device):
        d = dict(config_to_dict(device), regime="RedSidebandSingleTone", G_hz=1.0)
        _, drive, _ = config_from_dict(d)
        assert drive.delta == -device.omega_m

    def test_unknown_key(self, device):
        with pytest.raises(ConfigurationError, match="omega_hz"):
            config_from_dict(dict(config_to_dict(device), omega_hz=1.0))

    def test_unknown_regime(self, device):
        with pytest.raises(ConfigurationError, match="regime"):
            config_from_dict(dict(config_to_dict(device), regime="Blue"))

    def test_params_hash_stable(self, device):
        assert params_hash(device) == params_hash(SystemParams.from_hz(4.517e9, 707.4e3, 145e3,
                                                                       156e3, 8.8e-3, 10.0))
        assert len(params_hash(device)) == 16
        int(params_hash(device), 16)
