"""Exception hierarchy for extendkit."""


class ExtendKitError(Exception):
    """Base class for all extendkit errors."""


class RangeError(ExtendKitError, IndexError):
    """A requested index lies outside the data available to the model."""


class PowerOverflowError(ExtendKitError, ArithmeticError):
    """A non-finite intermediate appeared while forming operator powers."""


class PreconditionError(ExtendKitError, ValueError):
    """An operation was called on inputs that violate its precondition."""


class CertificationError(ExtendKitError):
    """No admissible constant certifies the requested condition.

    Attributes
    ----------
    worst_margin : float
        The most negative log-margin encountered.
    """

    def __init__(self, message, worst_margin=float("nan")):
        super().__init__(message)
        self.worst_margin = worst_margin


class NumericalError(ExtendKitError, ArithmeticError):
    """A linear-algebra step was too ill-conditioned to trust."""


class SchemaError(ExtendKitError, ValueError):
    """Malformed input document; ``field`` names the offending key."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
