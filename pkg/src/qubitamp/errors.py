"""Exception hierarchy shared by all modules."""


class QubitAmpError(Exception):
    """Base class for library errors."""


class TruncationError(QubitAmpError):
    """A state would exceed the configured photon-number truncation."""


class UnitaryError(QubitAmpError, ValueError):
    """A mode transformation that must be unitary is not."""


class ModeError(QubitAmpError, KeyError):
    """A mode label is not part of the register it is looked up in."""

    def __str__(self):
        return Exception.__str__(self)


class ParamError(QubitAmpError, ValueError):
    """A physical parameter lies outside its allowed range."""


class ZeroSuccessError(QubitAmpError):
    """Heralding succeeds with zero probability, so the output is undefined."""


class PolicyError(QubitAmpError, ValueError):
    """The requested heralding policy is not supported for these parameters."""


class NumericError(QubitAmpError, ArithmeticError):
    """A numerical routine failed to converge."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConfigError(QubitAmpError, ValueError):
    """A run configuration is malformed or has unknown keys."""
