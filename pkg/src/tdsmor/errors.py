"""Exception hierarchy shared by the library and the command-line front end."""


class TdsMorError(Exception):
    """Base class for all errors raised by :mod:`tdsmor`."""

    exit_code = 1


class ArgumentError(TdsMorError, ValueError):
    """Invalid argument, index out of range or inconsistent dimensions."""

    exit_code = 2


class CapacityError(TdsMorError):
    """A requested size exceeds a configured cap (basis order, memory)."""

    exit_code = 5


class NumericalError(TdsMorError, ArithmeticError):
    """A numerical procedure failed (singular operator, non-convergence).

    Extra diagnostics (condition estimates, residuals, spectra) are kept in
    :attr:`diagnostics` so that callers can report them.
    """

    exit_code = 4

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class DomainError(NumericalError):
    """The input lies outside the domain where the quantity is defined,
    e.g. a Gramian of an unstable system."""


class FileFormatError(TdsMorError, OSError):
    """A file is not a valid tdsmor system file (bad magic, truncated data)."""

    exit_code = 3
