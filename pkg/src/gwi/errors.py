"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class GWIError(Exception):
    """Base class for every error raised deliberately by this package."""


class ArityError(GWIError, ValueError):
    """Mismatched number of parties between states, settings and expressions."""


class DomainError(GWIError, ValueError):
    """A numeric argument lies outside its admissible domain."""


class ValidationError(GWIError, ValueError):
    """Malformed user input (states, behaviors, settings files)."""


class CapacityError(GWIError):
    """Requested problem size exceeds the enumeration/LP limits."""


class NumericalError(GWIError, ArithmeticError):
    """An internal numerical check failed."""
