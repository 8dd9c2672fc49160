"""Exponential-stability certificates and exponential integrators for
semilinear evolution equations with several constant delays,

    U'(t) = A U(t) + sum_i F_i(U(t), U(t - tau_i)).

Modules
-------
spectral        generators, exact propagators, state norms, semigroup envelopes
nonlinearity    delay nonlinearities and their declared bound metadata
history         history buffer with Hermite interpolation
stepper         method-of-steps exponential integrators and the RK4 oracle
certificates    global, linear-delay and small-data certificates; admissibility
scenarios       1-D diffusion, damped wave and competition presets
analysis        decay-rate fits and envelope checks
"""
from .analysis import check_envelope, fit_decay_rate
from .certificates import (admissibility_competition, admissibility_diffusion,
                           global_certificate, linear_delay_certificate, select_epsilon2,
                           small_data_certificate)
from .errors import (ConfigurationError, ContractError, FitError, HistoryUnderrun,
                     NotExponentiallyStable, NotGloballyLipschitz, RootFindingError)
from .history import HistoryBuffer
from .spectral import GeneralOperator, SpectralOperator, estimate_envelope, norms
from .stepper import StepPlan, Trajectory, integrate, oracle_integrate

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError", "ContractError", "FitError", "GeneralOperator", "HistoryBuffer",
    "HistoryUnderrun", "NotExponentiallyStable", "NotGloballyLipschitz", "RootFindingError",
    "SpectralOperator", "StepPlan", "Trajectory", "admissibility_competition",
    "admissibility_diffusion", "check_envelope", "estimate_envelope", "fit_decay_rate",
    "global_certificate", "integrate", "linear_delay_certificate", "norms", "oracle_integrate",
    "select_epsilon2", "small_data_certificate",
]
