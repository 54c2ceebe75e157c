import json

import numpy as np
import pytest

from optomech.constants import TWO_PI
from optomech.errors import ConfigurationError, DataFormatError
from optomech.model import bose_occupation, config_to_dict, coupling_for_cooperativity
from optomech.spectra import output_spectrum_bae
from optomech.synthlab import (HeatingModel, MeasurementChain, Scenario, TraceSettings,
                               read_dataset, synth_from_config, synth_output_trace,
                               synth_power_sweep, synth_scenario, synth_temperature_sweep,
                               write_dataset, write_synth_output)

CHAIN = MeasurementChain(1e4, 2.0)


@pytest.fixture
def scenario(device, bath):
    return Scenario(device, float(coupling_for_cooperativity(5.0, device.kappa, device.gamma)), bath)


def power_config(device, **kw):
    cfg = {"device": config_to_dict(device), "temperature_K": 0.037, "n_I_T": 0.386,
           "J": 2.6e8, "gamma_eff_hz": 2.9, "cooperativities": [0.5, 2.0, 10.0, 40.0],
           "chain": {"gain_A": 1e4, "n_add": 2.0}, "spectrum": {"n_avg": 100, "n_bins": 501}}
    cfg.update(kw)
    return cfg


def temperature_config(device, **kw):
    cfg = {"device": config_to_dict(device), "n_I_T": 0.386, "C_probe": 2.0,
           "temperatures_K": [0.025, 0.03, 0.05, 0.1, 0.2, 0.4], "T_floor_K": 0.03,
           "spectrum": {"n_avg": 100, "n_bins": 501}}
    cfg.update(kw)
    return cfg


class TestChain:
    def test_invariants(self):
        with pytest.raises(ConfigurationError) as info:
            MeasurementChain(0.0, -1.0)
        assert len(info.value.failures) == 2

    def test_heating_reduces_to_constant(self):
        h = HeatingModel()
        assert np.array_equal(h.n_m_T(3.0, np.array([0.0, 1.0, 10.0])), np.full(3, 3.0))
        with pytest.raises(ConfigurationError):
            HeatingModel(a_m=-1.0)

    def test_settings(self):
        with pytest.raises(ConfigurationError):
            TraceSettings(n_avg=0)
        g = TraceSettings(n_bins=101, span_linewidths=10).grid(2.0)
        assert g[0] == -20.0 and g[-1] == 20.0 and g.size == 101


class TestOutputTrace:
    def test_noiseless_is_exact(self, scenario, device, bath):
        s = TraceSettings(n_avg=None, n_bins=201)
        tr = synth_output_trace(scenario, CHAIN, 0, s)
        ideal = output_spectrum_bae(s.grid(device.gamma / TWO_PI), device, scenario.G, bath)
        assert np.allclose(tr.total, 1e4 * (ideal.total + 2.0), rtol=1e-14)

    def test_deterministic(self, scenario):
        a = synth_output_trace(scenario, CHAIN, 42)
        b = synth_output_trace(scenario, CHAIN, 42)
        c = synth_output_trace(scenario, CHAIN, 43)
        assert np.array_equal(a.total, b.total)
        assert not np.array_equal(a.total, c.total)

    def test_blind_metadata(self, scenario):
        md = synth_output_trace(scenario, CHAIN, 1).metadata
        assert set(md) == {"params_hash", "quantity", "n_avg"}

    def test_mean_of_many_seeds(self, scenario):
        s = TraceSettings(n_avg=100, n_bins=401)
        ideal = synth_output_trace(scenario, CHAIN, 0, TraceSettings(n_avg=None, n_bins=401)).total
        runs = np.array([synth_output_trace(scenario, CHAIN, k, s).total for k in range(1000)])
        z = (runs.mean(axis=0) - ideal) / (ideal / np.sqrt(100) / np.sqrt(1000))
        assert np.mean(np.abs(z) < 3) > 0.99
        assert abs(z.mean()) < 4 / np.sqrt(z.size)

    def test_per_bin_scatter(self, scenario):
        s = TraceSettings(n_avg=100, n_bins=401)
        ideal = synth_output_trace(scenario, CHAIN, 0, TraceSettings(n_avg=None, n_bins=401)).total
        runs = np.array([synth_output_trace(scenario, CHAIN, k, s).total for k in range(1000)])
        rel = np.std(runs / ideal, axis=0)
        assert np.median(rel) == pytest.approx(0.1, rel=0.03)

    def test_zero_coupling_is_flat(self, device, bath):
        tr = synth_output_trace(Scenario(device, 0.0, bath), CHAIN, 0, TraceSettings(n_avg=None))
        assert np.ptp(tr.total) == 0.0


class TestTemperatureSweep:
    def test_floor_only_below_threshold(self, device):
        ds = synth_temperature_sweep(temperature_config(device), 3)
        T = ds.axis_values
        n = np.asarray(ds.truth["n_m_T"])
        free = bose_occupation(T, device.omega_m)
        assert np.array_equal(n[T >= 0.03], free[T >= 0.03])
        assert n[0] > free[0]

    def test_noiseless_area_tracks_occupation(self, device):
        cfg = temperature_config(device, variant="single_tone", temperatures_K=[0.2],
                                 spectrum={"n_avg": None, "n_bins": 4001, "span_linewidths": 40})
        ds = synth_temperature_sweep(cfg, 0)
        tr = ds.traces[0]
        peak = tr.total - tr.total[0]
        assert peak.max() > 0
        assert ds.truth["X2"][0] == pytest.approx(ds.truth["n_m_T"][0] / 3 + ds.truth["n_c_T"])

    def test_seeds_share_truths(self, device):
        a = synth_temperature_sweep(temperature_config(device), 1)
        b = synth_temperature_sweep(temperature_config(device), 2)
        assert json.dumps(a.truth, default=list) == json.dumps(b.truth, default=list)
        assert not np.array_equal(a.traces[0].total, b.traces[0].total)

    def test_bad_variant(self, device):
        with pytest.raises(ConfigurationError):
            synth_temperature_sweep(temperature_config(device, variant="blue"), 0)


class TestPowerSweep:
    def test_zero_heating_flux_linear(self, device):
        ds = synth_power_sweep(power_config(device), 0)
        flux, C = np.asarray(ds.truth["flux"]), np.asarray(ds.truth["C"])
        assert np.allclose(flux / C, flux[0] / C[0], rtol=1e-14)

    def test_heating_overshoot(self, device):
        ds = synth_power_sweep(power_config(device, heating={"a_m": 3.8e7, "b_m": 2.0}), 0)
        excess = np.asarray(ds.truth["X2"]) / ds.truth["X2_0"] - 1
        assert excess[0] < 1e-3 and excess[-1] > 0.3
        assert np.all(np.diff(excess) > 0)

    def test_linewidth_fixed(self, device):
        ds = synth_power_sweep(power_config(device, spectrum={"n_avg": None, "n_bins": 501}), 0)
        for tr in ds.traces:
            f, y = tr.freq_hz, tr.total - tr.total[0]
            above = f[y > y.max() / 2]
            assert above[-1] - above[0] == pytest.approx(2.9, rel=0.05)

    def test_blind_view(self, device):
        ds = synth_power_sweep(power_config(device), 0)
        blind = ds.blind()
        assert blind.truth is None
        text = json.dumps(blind.header(), default=str)
        for secret in ("2.6e8", "260000000", "gain_A", "n_add", "heating"):
            assert secret not in text

    def test_unknown_key(self, device):
        with pytest.raises(ConfigurationError, match="unknown key"):
            synth_power_sweep(power_config(device, typo=1), 0)

    def test_missing_key(self, device):
        cfg = power_config(device)
        del cfg["J"]
        with pytest.raises(ConfigurationError, match="'J'"):
            synth_power_sweep(cfg, 0)


class TestDatasets:
    def test_round_trip(self, tmp_path, device):
        ds = synth_power_sweep(power_config(device), 5)
        write_dataset(ds, tmp_path)
        back = read_dataset(tmp_path, with_truth=True)
        assert back.kind == ds.kind and back.seed == 5
        assert np.array_equal(back.axis_values, ds.axis_values)
        assert all(np.array_equal(a.total, b.total) for a, b in zip(back.traces, ds.traces))
        assert back.truth["C"] == list(ds.truth["C"])
        assert read_dataset(tmp_path).truth is None

    def test_bit_identical_files(self, tmp_path, device):
        for name in ("a", "b"):
            write_dataset(synth_power_sweep(power_config(device), 9), tmp_path / name)
        for f in (tmp_path / "a").iterdir():
            assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()

    def test_missing_header(self, tmp_path):
        with pytest.raises(DataFormatError, match="dataset.json"):
            read_dataset(tmp_path)

    def test_scenario(self, tmp_path, device):
        cfg = {"kind": "scenario", "device": config_to_dict(device), "temperature_K": 0.037,
               "n_I_T": 0.386, "spectrum": {"n_avg": 100, "n_bins": 201},
               "pump": {"kind": "pump_sweep", "J": 2.6e8, "powers": [0.1, 1.0]},
               "temperature": {"kind": "temperature_sweep", "temperatures_K": [0.1, 0.2]},
               "power": {"kind": "power_sweep", "J": 2.6e8, "cooperativities": [1.0, 2.0]}}
        out = synth_scenario(cfg, 11)
        assert set(out) == {"pump", "temperature", "power"}
        assert all(ds.seed == 11 for ds in out.values())
        write_synth_output(out, tmp_path)
        assert (tmp_path / "power" / "point_1.csv").is_file()
        again = synth_from_config(cfg, 11)
        assert np.array_equal(again["pump"].traces[1].total, out["pump"].traces[1].total)

    def test_unknown_kind(self):
        with pytest.raises(ConfigurationError):
            synth_from_config({"kind": "nonsense"}, 0)
