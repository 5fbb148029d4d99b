"""Exception hierarchy shared across the package.

The CLI maps each class onto a distinct exit code, so library code raises
the most specific one that applies.
"""


class RenewcapError(Exception):
    """Base class for all package errors."""


class DomainError(RenewcapError, ValueError):
    """An argument lies outside the domain of the requested quantity."""


class NumericalInstabilityError(RenewcapError, ArithmeticError):
    """A computed quantity failed a sanity check that roundoff cannot explain."""


class DivergentModelError(RenewcapError):
    """The expected renewal count is infinite (or cannot be certified finite)."""

    def __init__(self, message: str, criterion: str = ""):
        super().__init__(message)
        self.criterion = criterion


class TruncatedPathError(RenewcapError):
    """An oracle-grade simulation produced a path that hit the event cap."""
