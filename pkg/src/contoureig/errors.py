"""Exception types shared across the package."""


class ContourEigError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(ContourEigError):
    pass


class NotHermitian(ContourEigError):
    pass


class IndefiniteB(ContourEigError):
    pass


class ZeroMatrix(ContourEigError):
    pass


class RankDeficientInput(ContourEigError):
    pass


class ParseError(ContourEigError):
    """Matrix Market parse failure, carries the 1-based line number."""

    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class UnsupportedFormat(ContourEigError):
    pass


class InvalidParams(ContourEigError):
    pass


class UnsupportedOrder(ContourEigError):
    pass


class InvalidAspect(ContourEigError):
    pass


class PoleOnContour(ContourEigError):
    pass


class Breakdown(ContourEigError):
    pass


class SingularSystem(ContourEigError):
    pass


class InvalidStartingBasis(ContourEigError):
    pass


class DegenerateDenominator(ContourEigError):
    """Trace stopping test has a (near-)zero denominator."""


class ZeroScale(ContourEigError):
    pass
