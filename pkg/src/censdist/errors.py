"""Exception hierarchy shared across the package."""


class CensDistError(Exception):
    """Base class for all package errors."""


class InvalidInputError(CensDistError, ValueError):
    """Malformed argument or input data."""


class InvalidLocaleError(InvalidInputError):
    """Locale polygon is degenerate or not simple."""


class DomainError(InvalidInputError):
    """Coordinates outside the domain of a distance metric."""


class UnknownLocaleError(CensDistError, KeyError):
    """An event references a locale id that was not supplied."""

    def __init__(self, locale_id):
        super().__init__(locale_id)
        self.locale_id = locale_id

    def __str__(self):
        return f"unknown locale id: {self.locale_id!r}"


class EmptyDataError(InvalidInputError):
    """No observations to work with."""


class ConvergenceError(CensDistError, RuntimeError):
    """The EM iteration hit its iteration cap before meeting tolerance."""

    def __init__(self, message, residual, iterations):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class DegenerateStatisticError(CensDistError, ValueError):
    """A statistic is undefined for the given data (e.g. zero bandwidth)."""


class InvalidLocaleCountError(InvalidInputError):
    """Requested locale count cannot be laid out as a reasonable grid."""


class InvalidWorldError(InvalidInputError):
    """Simulation world cannot generate events."""
