"""Exception and warning types raised across the package."""


class RplsError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(RplsError, ValueError):
    pass


# Spelled both ways in the CLI messages; keep one class.
DimensionError = DimensionMismatch


class BadShape(RplsError, ValueError):
    pass


class EmptyInput(RplsError, ValueError):
    pass


class NegativeQuadraticForm(RplsError, ValueError):
    pass


class DegenerateFactor(RplsError):
    pass


class DegenerateDirection(RplsError):
    pass


class ZeroMatrix(RplsError, ValueError):
    pass


class BadGroups(RplsError, ValueError):
    pass


class BadRange(RplsError, ValueError):
    pass


class BadBandwidth(RplsError, ValueError):
    pass


class NotSymmetric(RplsError, ValueError):
    pass


AsymmetricInput = NotSymmetric


class NotPSD(RplsError, ValueError):
    pass


class DegenerateOperator(RplsError, ValueError):
    pass


class AllDegenerate(RplsError):
    pass


class NonOrthogonalFactors(RplsError, ValueError):
    pass


class TooFewSamples(RplsError, ValueError):
    pass


class SingularFactors(RplsError):
    pass


class SingularCovariance(RplsError):
    pass


class ClassCodingError(RplsError, ValueError):
    pass


class ModelFormatError(RplsError, ValueError):
    pass


class CsvFormatError(RplsError, ValueError):
    pass


class DegenerateColumnWarning(UserWarning):
    pass


class SingletonClassWarning(UserWarning):
    pass


class NotConvergedWarning(UserWarning):
    pass
