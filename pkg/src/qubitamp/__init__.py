"""Entanglement-assisted linear-optical qubit amplifier: Fock-space simulation,
closed-form laws, entanglement distillation and DI-QKD rate analysis."""

__version__ = "0.1.0"

from .amplifier import (
    AmplifierConfig,
    AmplifierOutcome,
    EntangledQubitAmplifier,
    Policy,
    QubitVacuumInput,
    amplify_closed_form,
    amplify_simulated,
    gain,
    nominal_gain,
    reflectivity_for_gain,
    success_probability,
    sweep_gain_probability,
)
from .entanglement import AmplitudeDampedState, Measure
from .errors import (
    ConfigError,
    ModeError,
    NumericError,
    ParamError,
    PolicyError,
    QubitAmpError,
    TruncationError,
    UnitaryError,
    ZeroSuccessError,
)
