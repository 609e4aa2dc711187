"""Exception types raised across the package."""


class DimensionError(ValueError):
    """Operator, target list and layout do not fit together."""


class ValidationError(ValueError):
    """A protocol component fails a structural or numerical validity check."""


class UnsupportedComputer(ValueError):
    """The requested operation is undefined for this computer family."""


class NotApplicable(ValueError):
    """A bound check was asked of a protocol it does not cover."""


class BoundViolation(AssertionError):
    """A proven inequality failed at runtime; indicates a bug or bad tolerance."""


class LeafCapExceeded(RuntimeError):
    """History expansion would produce more leaves than the configured cap."""

    def __init__(self, cap: int):
        super().__init__(f"history tree exceeds leaf cap of {cap} leaves")
        self.cap = cap


class DocumentError(ValueError):
    """A protocol document could not be parsed; ``where`` locates the fault."""

    def __init__(self, message: str, where: str = ""):
        super().__init__(f"{where}: {message}" if where else message)
        self.where = where
