from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from optomech.constants import TWO_PI
from optomech.errors import RegimeError
from optomech.model import BathState, Regime, SystemParams, coupling_for_cooperativity
from optomech.selftest import INTEGRATION_DEVICES, bath_for, integral_deviation
from optomech.spectra import (COMPONENTS, LAB, ROTATING, SpectrumTrace, VarianceReport,
                              backaction_occupancy, bae_quadrature_split, integrate_spectrum,
                              lab_grid, lorentzian_pair, output_flux_bae, output_prefactor,
                              output_spectrum_bae, peak_grid, rotating_grid,
                              sideband_cooled_occupation, spectrum_quadratures_bae,
                              spectrum_x_bad_cavity, spectrum_x_good_cavity, variance_bad_cavity,
                              variance_bae, variance_good_cavity)
from optomech.synthlab import MeasurementChain

BAD = INTEGRATION_DEVICES[Regime.BAD_CAVITY]
BAE = INTEGRATION_DEVICES[Regime.BAE]
GOOD = INTEGRATION_DEVICES[Regime.RED_SIDEBAND]


def tails(trace, **kw):
    return integrate_spectrum(trace, tail_model="lorentzian", **kw)


def s0_trace(gamma_hz=1.0, span=50.0, n=2**14):
    f = peak_grid(0.0, gamma_hz, n, span)
    _, _, s0 = lorentzian_pair(TWO_PI * f, TWO_PI * gamma_hz, 0.0)
    return SpectrumTrace(f, s0, metadata={"peaks": [(0.0, gamma_hz)]})


class TestLorentzianPair:
    def test_peak_value(self):
        lp, _, _ = lorentzian_pair(np.array([5.0]), 0.1, 5.0)
        assert lp[0] == pytest.approx(4 / 0.1**2, rel=1e-15)

    def test_symmetry(self):
        w = np.linspace(0, 20, 101)
        assert np.array_equal(lorentzian_pair(w, 0.3, 7.0)[2], lorentzian_pair(-w, 0.3, 7.0)[2])

    def test_unit_area(self):
        g, wm = TWO_PI * 1e-2, TWO_PI * 1e4
        f = lab_grid(wm, g)
        _, _, s0 = lorentzian_pair(TWO_PI * f, g, wm)
        tr = SpectrumTrace(f, s0, frame=LAB, metadata={"peaks": [(-1e4, 1e-2), (1e4, 1e-2)]})
        assert tails(tr).value == pytest.approx(1.0, abs=1e-6)

    def test_rejects_zero_width(self):
        with pytest.raises(ValueError):
            lorentzian_pair(np.zeros(1), 0.0, 1.0)


class TestIntegrate:
    def test_fifty_linewidths_with_tails(self):
        res = tails(s0_trace(span=50.0))
        assert res.value == pytest.approx(1.0, abs=1e-6)
        assert res.error < 1e-6

    def test_tails_matter(self):
        plain = integrate_spectrum(s0_trace(span=50.0))
        assert abs(plain.value - 1.0) > 1e-3

    def test_zero_trace(self):
        f = np.linspace(-1, 1, 11)
        assert integrate_spectrum(SpectrumTrace(f, np.zeros(11))).value == 0.0

    def test_band_outside_grid(self):
        with pytest.raises(ValueError, match="outside"):
            integrate_spectrum(s0_trace(), band=(-1e3, 0.0))

    def test_band(self):
        tr = s0_trace(span=50.0)
        f0 = tr.freq_hz[tr.freq_hz > 0][0]
        half = integrate_spectrum(tr, band=(0.0, 50.0)).value
        assert half == pytest.approx((np.arctan(100.0) - np.arctan(2 * f0)) / np.pi, rel=1e-6)

    def test_unknown_tail_model(self):
        with pytest.raises(ValueError):
            integrate_spectrum(s0_trace(), tail_model="gaussian")

    def test_tails_need_peaks(self):
        f = np.linspace(-1, 1, 11)
        with pytest.raises(ValueError, match="peaks"):
            tails(SpectrumTrace(f, np.ones(11)))

    def test_bae_x_variance(self):
        s_x, _ = spectrum_quadratures_bae(rotating_grid(1e-2), BAE, 0.0, BathState(1089.0))
        assert tails(s_x).value == pytest.approx(1089.5, rel=1e-4)


class TestSpectrumTrace:
    def test_components_sum_to_total(self, bath):
        G = coupling_for_cooperativity(3.0, BAD.kappa, BAD.gamma)
        tr = spectrum_x_bad_cavity(lab_grid(BAD.omega_m, BAD.gamma), BAD, G, bath)
        assert tr.component_mismatch() < 1e-12
        assert np.all(tr.total >= 0)
        assert tr.frame == LAB

    def test_grid_must_increase(self):
        with pytest.raises(ValueError, match="increasing"):
            SpectrumTrace(np.array([0.0, 0.0, 1.0]), np.ones(3))

    def test_unknown_component(self):
        with pytest.raises(ValueError):
            SpectrumTrace(np.arange(3.0), np.ones(3), {"noise": np.ones(3)})

    def test_scaled_books_floor(self):
        tr = SpectrumTrace.from_components(np.arange(4.0), {"vacuum": np.full(4, 0.5)})
        s = tr.scaled(10.0, 3.0)
        assert np.array_equal(s.total, np.full(4, 8.0))
        assert np.array_equal(s.components["floor"], np.full(4, 3.0))

    def test_missing_component_reads_zero(self):
        tr = SpectrumTrace.from_components(np.arange(3.0), {"vacuum": np.ones(3)})
        assert not np.any(tr.component("qba"))
        with pytest.raises(KeyError):
            tr.component("bogus")

    def test_component_names(self):
        assert COMPONENTS == ("vacuum", "thermal", "qba", "classical", "floor")


class TestBadCavitySpectrum:
    def spectrum(self, C, n_m, n_c):
        G = coupling_for_cooperativity(C, BAD.kappa, BAD.gamma)
        return spectrum_x_bad_cavity(lab_grid(BAD.omega_m, BAD.gamma), BAD, G,
                                     bath_for(BAD, n_m, n_c))

    def test_vacuum_only(self):
        assert tails(self.spectrum(0, 0, 0)).value == pytest.approx(0.5, rel=1e-6)

    def test_unit_cooperativity(self):
        assert tails(self.spectrum(1, 0, 0)).value == pytest.approx(1.5, rel=1e-6)

    def test_backaction_component(self):
        tr = self.spectrum(1, 0, 0.5)
        ba = tails(tr, component="qba").value + tails(tr, component="classical").value
        assert ba == pytest.approx(2.0, rel=1e-6)

    def test_vacuum_only_at_positive_frequency(self):
        tr = self.spectrum(1, 3, 0)
        vac = tr.components["vacuum"]
        neg, pos = vac[tr.freq_hz < 0], vac[tr.freq_hz > 0]
        assert neg.max() < 1e-6 * pos.max()
        th = tr.components["thermal"]
        assert np.allclose(th, th[::-1], rtol=1e-9)


class TestGoodCavitySpectrum:
    def test_integral(self):
        C, n_m, n_c = 50.0, 200.0, 0.3
        G = coupling_for_cooperativity(C, GOOD.kappa, GOOD.gamma)
        grid = lab_grid(GOOD.omega_m, GOOD.gamma * (1 + C))
        tr = spectrum_x_good_cavity(grid, GOOD, G, bath_for(GOOD, n_m, n_c))
        assert tails(tr).value == pytest.approx(variance_good_cavity(C, n_m, n_c).variance("x"),
                                                rel=1e-6)
        p = spectrum_x_good_cavity(grid, GOOD, G, bath_for(GOOD, n_m, n_c), output="p")
        assert tails(p).value == pytest.approx(tails(tr).value, rel=1e-6)


class TestBaeSpectra:
    def test_x_independent_of_coupling(self, bath):
        grid = rotating_grid(1e-2)
        xs = [spectrum_quadratures_bae(grid, BAE, coupling_for_cooperativity(C, BAE.kappa, BAE.gamma),
                                       bath)[0] for C in (0.5, 50.0)]
        assert np.array_equal(xs[0].total, xs[1].total)

    def test_p_excess_at_zero(self, bath):
        G = 300.0
        s_x, s_p = spectrum_quadratures_bae(np.array([-1.0, 0.0, 1.0]), BAE, G, bath)
        n_c = bath.n_c_T(BAE)
        expected = 64 * G**2 / (BAE.gamma**2 * BAE.kappa) * (0.5 + n_c)
        assert s_p.total[1] - s_x.total[1] == pytest.approx(expected, rel=1e-13)

    def test_integrals(self):
        C, n_m, n_c = 2.0, 5.0, 0.0
        G = coupling_for_cooperativity(C, BAE.kappa, BAE.gamma)
        s_x, s_p = spectrum_quadratures_bae(rotating_grid(1e-2), BAE, G, bath_for(BAE, n_m, n_c))
        assert tails(s_x).value == pytest.approx(5.5, rel=1e-6)
        assert tails(s_p).value == pytest.approx(9.5, rel=1e-6)
        assert s_x.frame == ROTATING

    def test_cooling_tone(self):
        ge = TWO_PI * 2.9
        C_cool = ge / BAE.gamma - 1
        var = variance_bae(3.0, 1000.0, 0.2, C_cool)
        G = coupling_for_cooperativity(3.0, BAE.kappa, BAE.gamma)
        s_x, s_p = spectrum_quadratures_bae(rotating_grid(2.9), BAE, G, bath_for(BAE, 1000.0, 0.2),
                                            ge, var.variance("X") - 0.5)
        assert tails(s_x).value == pytest.approx(var.variance("X"), rel=1e-6)
        assert tails(s_p).value == pytest.approx(var.variance("P"), rel=1e-6)
        assert s_x.metadata["gamma_eff_hz"] == pytest.approx(2.9)


class TestOutputSpectrum:
    def test_vacuum_output(self):
        tr = output_spectrum_bae(rotating_grid(1e-2, n=64), BAE, 0.0, BathState(100.0))
        assert np.array_equal(tr.total, np.full(64, 0.5))

    def test_peak_height(self, bath):
        G = coupling_for_cooperativity(2.0, BAE.kappa, BAE.gamma)
        tr = output_spectrum_bae(np.array([-1e3, 0.0]), BAE, G, bath)
        floor = 0.5 + 4 * BAE.kappa_e / BAE.kappa * bath.n_c_T(BAE)
        C = 2.0
        expected = 4 * C * BAE.gamma * BAE.kappa_e / BAE.kappa * (4 / BAE.gamma) * (0.5 + bath.n_m_T)
        assert tr.total[1] - floor == pytest.approx(expected, rel=1e-9)

    @given(st.floats(0, 1e4), st.floats(1e2, 1e7), st.floats(1e2, 1e7), st.floats(1e-4, 1e2))
    def test_prefactor_identity(self, G, ke, ki, g):
        p = SystemParams(1e9, 1e7, ke, ki, g, 1.0)
        C = 4 * G**2 / (p.kappa * g)
        assert output_prefactor(p, G) == pytest.approx(4 * C * g * ke / p.kappa, rel=1e-12,
                                                       abs=1e-300)

    def test_chain(self, bath):
        G = coupling_for_cooperativity(2.0, BAE.kappa, BAE.gamma)
        grid = rotating_grid(1e-2, n=256)
        bare = output_spectrum_bae(grid, BAE, G, bath)
        det = output_spectrum_bae(grid, BAE, G, bath, MeasurementChain(1e4, 3.0))
        assert np.allclose(det.total, 1e4 * (bare.total + 3.0), rtol=1e-14)
        assert det.component_mismatch() < 1e-12


class TestVariances:
    def test_bad_cavity_examples(self):
        assert variance_bad_cavity(0, 0, 0).variance("x") == 0.5
        v = variance_bad_cavity(1, 0, 0)
        assert v.variance("x") == 1.5 and v.variance("p") == 1.5 and v.n_qba == 1
        v = variance_bad_cavity(2, 100, 0.25)
        assert v.variance("x") == 103.5 and v.n_qba == 2
        assert v.components["x"]["classical_ba"] == 1.0

    def test_good_cavity_examples(self):
        assert variance_good_cavity(0, 7.0, 0.3).variance("x") == 7.5
        v = variance_good_cavity(1e12, 1089.0, 0.2)
        assert v.variance("x") == pytest.approx(0.7, rel=1e-8)
        v = variance_good_cavity(4.0, 10.0, 0.0)
        assert v.n_qba == 2.0 and v.qba_eff == pytest.approx(0.4)

    def test_reference_cooling_point(self):
        n = sideband_cooled_occupation(1.02e4, 1089.0, 0.2)
        assert n == pytest.approx(0.31, abs=0.02)
        assert variance_good_cavity(1.02e4, 1089.0, 0.2).n_m == n

    def test_bae_examples(self):
        v = variance_bae(2, 5, 0)
        assert v.variance("X") == 5.5 and v.variance("P") == 9.5
        assert v.components["P"]["qba"] == 4 and v.n_qba == 2
        assert v.components["X"]["qba"] == 0.0
        assert variance_bae(1, 0, 0.5).components["P"]["classical_ba"] == 2.0
        xs = {variance_bae(C, 5, 0.1).variance("X") for C in (0, 1, 100)}
        assert xs == {5.5}

    def test_bae_cooling_reduces_to_sideband_cooling(self):
        v = variance_bae(3.0, 1000.0, 0.2, C_cool=300.0)
        assert v.variance("X") == pytest.approx(
            variance_good_cavity(300.0, 1000.0, 0.2).variance("x"), rel=1e-15)
        assert v.components["P"]["qba"] == pytest.approx(150.0 / 301 + 6.0 / 301, rel=1e-14)
        assert v.n_m == pytest.approx(1000.0 / 301 + 0.2, rel=1e-15)

    def test_negative_C(self):
        for fn in (variance_bad_cavity, variance_good_cavity, variance_bae):
            with pytest.raises(Exception):
                fn(-1.0, 0.0, 0.0)

    def test_negative_component_rejected(self):
        with pytest.raises(ValueError):
            VarianceReport(Regime.BAE, {"X": {"vacuum": -0.1}}, n_qba=0.0)

    @given(st.floats(0, 1e4), st.floats(0, 1e4), st.floats(0, 1))
    def test_decomposition_sums(self, C, n_m, n_c):
        for v in (variance_bad_cavity(C, n_m, n_c), variance_good_cavity(C, n_m, n_c),
                  variance_bae(C, n_m, n_c)):
            for q, parts in v.components.items():
                assert all(x >= 0 for x in parts.values())
                assert sum(parts.values()) == pytest.approx(v.variance(q), rel=1e-12)
            assert v.as_dict()["totals"] == v.totals


class TestBackaction:
    def test_zero(self):
        assert [backaction_occupancy(r, 0) for r in Regime] == [0, 0, 0]

    def test_ten(self):
        got = [backaction_occupancy(r, 10) for r in
               (Regime.BAD_CAVITY, Regime.RED_SIDEBAND, Regime.BAE)]
        assert got == [10, 5, 10]

    def test_exact_rationals(self):
        C = Fraction(22, 7)
        assert backaction_occupancy(Regime.RED_SIDEBAND, C) == Fraction(11, 7)
        split = bae_quadrature_split(C)
        assert split == {"X": 0, "P": 2 * C}
        assert sum(split.values()) == 2 * backaction_occupancy(Regime.BAE, C)

    def test_unknown_regime(self):
        with pytest.raises(RegimeError):
            backaction_occupancy("BlueSideband", 1.0)


class TestOutputFlux:
    def test_zero(self):
        assert output_flux_bae(0.0, 1.0, 145.0, 301.0, 0.5) == 0.0

    def test_membrane_loss_ratio(self):
        assert output_flux_bae(1.0, 1.0, 145.0, 301.0, 0.5) == pytest.approx(0.963455, rel=1e-6)

    @given(st.floats(0, 1e4), st.floats(1e-3, 1e4))
    def test_linear_in_C(self, C, X2):
        a = output_flux_bae(2 * C, 1.0, 145.0, 301.0, X2)
        assert a == pytest.approx(2 * output_flux_bae(C, 1.0, 145.0, 301.0, X2), rel=1e-14)


@pytest.mark.parametrize("regime", list(Regime))
@given(st.floats(0, 1e4), st.floats(0, 1e4), st.floats(0, 1))
def test_integrated_spectra_match_closed_forms(regime, C, n_m, n_c):
    assert integral_deviation(regime, C, n_m, n_c, n_grid=2**13) < 1e-5


def test_grids():
    g = peak_grid(10.0, 1.0, n=1001, span=5.0)
    assert g[0] == pytest.approx(5.0) and g[-1] == pytest.approx(15.0) and g[500] == 10.0
    steps = np.diff(g)
    assert steps[500] < steps[0]
    lab = lab_grid(TWO_PI * 1e3, TWO_PI * 1.0, n=200, span=10.0)
    assert lab.size == 200 and np.all(np.diff(lab) > 0)
    with pytest.raises(ValueError, match="overlap"):
        lab_grid(TWO_PI * 10.0, TWO_PI * 1.0, span=20.0)
