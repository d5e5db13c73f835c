"""Exception types raised across the package."""


class MstctError(Exception):
    """Base class for all package errors."""


class DegenerateRay(MstctError):
    """A point lies on the source trajectory or detector line."""


class AxisTooShort(MstctError):
    pass


class SupportViolation(MstctError):
    pass


class NoZeroRows(MstctError):
    """Too few known-zero rows to estimate the inversion constant."""


class FormatError(MstctError):
    pass


class GeometryMismatch(MstctError):
    pass


class NegativeProjection(MstctError):
    pass


class EmptyMask(MstctError):
    pass


class ZeroReference(MstctError):
    pass


class EmptyRegion(MstctError):
    pass


class ConfigError(MstctError):
    pass
