"""Krotov optimal control of a qubit in a non-Markovian Ohmic bath.

The time-nonlocal Born master equation is made time-local by fitting the bath
correlation function with a few damped exponentials and propagating the
auxiliary operators K_j, K_j^dag alongside rho in an extended Liouville space.
"""
from .bath import (BathParams, CorrelationSample, ExponentialSeries, correlation_function,
                   correlation_imag_closed_form, fit_exponential_series, sample_correlation,
                   spectral_density)
from .errors import ContractError, NumericalError
from .kernels import BACKEND
from .krotov import (GateTarget, IterationRecord, KrotovConfig, gate_error,
                     identity_gate_superoperator, krotov_update_value, objective,
                     run_optimization, trace_fidelity, z_gate_superoperator)
from .liouville import (ControlPulse, ExtendedGenerator, assemble_generator,
                        generator_control_derivative, propagate_backward, propagate_forward)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BathParams", "ContractError", "ControlPulse", "CorrelationSample",
    "ExponentialSeries", "ExtendedGenerator", "GateTarget", "IterationRecord", "KrotovConfig",
    "NumericalError", "assemble_generator", "correlation_function",
    "correlation_imag_closed_form", "fit_exponential_series", "gate_error",
    "generator_control_derivative", "identity_gate_superoperator", "krotov_update_value",
    "objective", "propagate_backward", "propagate_forward", "run_optimization",
    "sample_correlation", "spectral_density", "trace_fidelity", "z_gate_superoperator",
]
