"""Exception types shared across the package."""


class CrestError(Exception):
    """Base class for all errors raised by crest."""


class ShapeError(CrestError, ValueError):
    pass


class DomainError(CrestError, ValueError):
    pass


class NumericError(CrestError, ArithmeticError):
    pass


class DegenerateFusionError(DomainError):
    """Both opinions are dogmatic (u = 0), so the fusion rule is 0/0."""


class FormatError(CrestError, ValueError):
    pass


class ConfigError(CrestError, ValueError):
    pass
