"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class SSUError(Exception):
    """Base class for all library errors."""


class DataError(SSUError, ValueError):
    """Malformed, inconsistent or too-small input data."""


class FoldTooSmallError(DataError):
    """A cross-fit or nested fold has too few labeled rows."""


class ArityError(DataError):
    """Kernel called with the wrong number or shape of arguments."""


class UnsupportedOperation(SSUError, TypeError):
    """Operation not defined for this object (e.g. smoother weights of OLS)."""


class NumericalFailure(SSUError, ArithmeticError):
    """A numerical routine failed (singular system, degenerate variance)."""


class SimulationError(SSUError, RuntimeError):
    """A Monte Carlo repetition failed; the message carries its seed."""


class UnknownNameError(SSUError, LookupError):
    """Unknown registry name; ``suggestions`` lists close matches."""

    def __init__(self, kind, name, suggestions=()):
        self.kind = kind
        self.name = name
        self.suggestions = list(suggestions)
        hint = f"; did you mean: {', '.join(self.suggestions)}" if self.suggestions else ""
        super().__init__(f"unknown {kind} {name!r}{hint}")

    def __str__(self):
        return self.args[0]


class ConfigError(SSUError, ValueError):
    """Invalid user configuration (regressor string, hyperparameter, config file field)."""
