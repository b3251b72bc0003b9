"""Exception types shared across the package."""


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation."""


class DimensionMismatch(DomainError):
    """Operands live in balls of different dimension."""


class DilationOutOfScope(DomainError):
    """Boundary dilation is not in (1, oo): parabolic-like or super-repelling."""


class ConfigError(ValueError):
    """Malformed map/premodel/run specification."""


class NumericalError(RuntimeError):
    """An iterative procedure failed to converge or ran out of resolution."""


class InvariantViolation(RuntimeError):
    """A checked mathematical invariant failed on concrete data."""
