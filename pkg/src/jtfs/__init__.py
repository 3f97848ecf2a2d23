"""Time, frequency and joint time-frequency scattering of audio signals."""
from .errors import (ConfigError, DataError, InvalidSpecError, NumericalError, ParseError,
                     ScatteringError, UnsupportedFormatError)
from .filterbank import (AnalyticFilter, FilterBank, FilterBankSpec, build_filterbank,
                         build_mother_wavelet, build_quefrency_bank, littlewood_paley)
from .joint import (JointWavelet, RidgeMap, asymmetry_index, build_joint_wavelets,
                    extract_ridge, joint_scatter, joint_transform)
from .plan import ScatteringPlan
from .reconstruction import (ReconstructionState, ScatteringOperator, analyze,
                             backprop_gradient, reconstruct, scattering_loss)
from .scalogram import S1Coeffs, Scalogram, Signal, s1, scalogram, wavelet_transform
from .time_scattering import (ScatteringCoeffs, ScatteringPath, freq_scatter, log_compress,
                              time_scatter)

__version__ = "0.1.0"

__all__ = [
    "AnalyticFilter", "ConfigError", "DataError", "FilterBank", "FilterBankSpec",
    "InvalidSpecError", "JointWavelet", "NumericalError", "ParseError", "ReconstructionState",
    "RidgeMap", "S1Coeffs", "Scalogram", "ScatteringCoeffs", "ScatteringError",
    "ScatteringOperator", "ScatteringPath", "ScatteringPlan", "Signal",
    "UnsupportedFormatError", "analyze", "asymmetry_index", "backprop_gradient",
    "build_filterbank", "build_joint_wavelets", "build_mother_wavelet",
    "build_quefrency_bank", "extract_ridge", "freq_scatter", "joint_scatter",
    "joint_transform", "littlewood_paley", "log_compress", "reconstruct", "s1",
    "scalogram", "scattering_loss", "time_scatter", "wavelet_transform",
]
