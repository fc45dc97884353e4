"""Exception hierarchy shared by every module of the package."""


class QuadropError(Exception):
    """Base class of all package errors."""


class NotSymmetric(QuadropError):
    pass


class NotAccretive(QuadropError):
    pass


class BadDimension(QuadropError):
    pass


class IllConditioned(QuadropError):
    pass


class FocalTime(QuadropError):
    pass


class SingularForm(QuadropError):
    pass


class DegreeCap(QuadropError):
    pass


class OverflowGuard(QuadropError):
    pass


class NotPositiveDefinite(QuadropError):
    pass


class EmptyComplement(QuadropError):
    pass


class TruncationTooLarge(QuadropError):
    pass


class GridUnderResolved(QuadropError):
    pass


class InsufficientData(QuadropError):
    pass


class ParameterOutOfRange(QuadropError):
    pass


class NyquistViolation(QuadropError):
    pass


class ZeroOnOmega(QuadropError):
    pass


class GramianSingular(QuadropError):
    pass


class StageDivergence(QuadropError):
    pass


class SchemaError(QuadropError):
    """Invalid run configuration; ``path`` names the offending field."""

    def __init__(self, message, path=""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)
