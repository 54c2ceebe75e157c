"""Linearized cavity-optomechanics spectra, synthetic measurement data and
the calibration chain of a two-tone backaction-evading measurement.

Internal units are rad/s; frequencies on grids and in files are in Hz.
"""

from .calibration import (BaeFluxCalibration, CalibrationResult, EvasionReport, PipelineReport,
                          PumpCalibration, TemperatureCalibration, calibrate_bae_flux,
                          calibrate_pump, calibrate_temperature_sweep, evaluate_bae_evasion,
                          run_pipeline)
from .constants import HBAR, K_B, TWO_PI
from .errors import (CalibrationError, ConfigurationError, DataFormatError, DomainError, FitError,
                     NumericalError, OptomechError, RegimeError)
from .fitting import LinearFit, LorentzianFit, fit_linear_through_origin, fit_lorentzian
from .model import (BathState, CoolingTone, DriveScheme, Regime, SystemParams, bose_occupation,
                    cavity_thermal_occupation, config_from_dict, config_to_dict, cooperativity,
                    coupling_for_cooperativity, enhanced_coupling, membrane_device,
                    optical_damping, validate_params)
from .response import (TransductionSet, approximation_bound, closed_form, noise_channels,
                       solve_linear_response)
from .simulate import Simulation, simulate
from .spectra import (SpectrumTrace, VarianceReport, backaction_occupancy, bae_quadrature_split,
                      integrate_spectrum, output_spectrum_bae, spectrum_quadratures_bae,
                      spectrum_x_bad_cavity, spectrum_x_good_cavity, variance_bad_cavity,
                      variance_bae, variance_good_cavity)
from .synthlab import (HeatingModel, MeasurementChain, SweepDataset, TraceSettings,
                       read_dataset, synth_from_config, write_dataset)
from .traceio import read_trace, write_trace

__version__ = "0.1.0"

__all__ = [
    "BaeFluxCalibration", "BathState", "CalibrationError", "CalibrationResult",
    "ConfigurationError", "CoolingTone", "DataFormatError", "DomainError", "DriveScheme",
    "EvasionReport", "FitError", "HBAR", "HeatingModel", "K_B", "LinearFit", "LorentzianFit",
    "MeasurementChain", "NumericalError", "OptomechError", "PipelineReport", "PumpCalibration",
    "Regime", "RegimeError", "Simulation", "SpectrumTrace", "SweepDataset", "SystemParams",
    "TWO_PI", "TemperatureCalibration", "TraceSettings", "TransductionSet", "VarianceReport",
    "approximation_bound", "backaction_occupancy", "bae_quadrature_split", "bose_occupation",
    "calibrate_bae_flux", "calibrate_pump", "calibrate_temperature_sweep",
    "cavity_thermal_occupation", "closed_form", "config_from_dict", "config_to_dict",
    "cooperativity", "coupling_for_cooperativity", "enhanced_coupling", "evaluate_bae_evasion",
    "fit_linear_through_origin", "fit_lorentzian", "integrate_spectrum", "membrane_device",
    "noise_channels", "optical_damping", "output_spectrum_bae", "read_dataset", "read_trace",
    "run_pipeline", "simulate", "solve_linear_response", "spectrum_quadratures_bae",
    "spectrum_x_bad_cavity", "spectrum_x_good_cavity", "synth_from_config", "validate_params",
    "variance_bad_cavity", "variance_bae", "variance_good_cavity", "write_dataset",
    "write_trace", "__version__",
]
