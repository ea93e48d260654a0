"""Exception hierarchy.

Every error that reports a violated invariant carries the measured value in
``.value`` so callers (and the CLI) can print a precise diagnostic.
"""


class DensityLabError(Exception):
    """Base class for all package errors."""


class ConfigError(DensityLabError, ValueError):
    """Malformed or inconsistent configuration (CLI exit code 2)."""


class NumericalFault(DensityLabError, ArithmeticError):
    """A computed quantity left its valid range (CLI exit code 3)."""


class InvariantViolation(NumericalFault):
    def __init__(self, value, message=None):
        self.value = value
        super().__init__(message or f"{type(self).__name__}({value!r})")


class NotHermitian(InvariantViolation):
    pass


class TraceNotOne(InvariantViolation):
    pass


class NotPositive(InvariantViolation):
    pass


class NotNormalized(InvariantViolation):
    pass


class NotUnitary(InvariantViolation):
    pass


class NegativeDiagonal(InvariantViolation):
    pass


class DimensionMismatch(DensityLabError, ValueError):
    pass


class EmptyBasis(DensityLabError, ValueError):
    pass


class NotOrthonormal(DensityLabError, ValueError):
    def __init__(self, i, j, overlap):
        self.i, self.j, self.overlap = i, j, overlap
        super().__init__(f"vectors {i} and {j} have overlap {overlap!r}")


class DimensionCapExceeded(ConfigError):
    def __init__(self, dim, cap):
        self.value = dim
        super().__init__(f"basis size {dim} exceeds dimension cap {cap}")


class UnknownPotential(ConfigError):
    pass


class EmptyShell(DensityLabError, ValueError):
    pass


class NotAPartition(ConfigError):
    pass


class IndexOutOfRange(DensityLabError, IndexError):
    pass


class StepTooLarge(ConfigError):
    pass


class SpeedCapExceeded(NumericalFault):
    pass


class ZeroSlice(DensityLabError, ValueError):
    pass


class DegenerateDensity(NumericalFault):
    pass


class SupportMismatch(DensityLabError, ValueError):
    pass
