"""Exception hierarchy shared by every lobq module."""


class LobqError(Exception):
    """Base class for all library errors."""


class DomainError(LobqError, ValueError):
    """An argument lies outside the domain of the requested quantity."""


class PrecisionError(LobqError, ArithmeticError):
    """A computation lost too many significant digits to be trusted."""


class ConvergenceError(LobqError, RuntimeError):
    """An iterative or adaptive procedure exhausted its budget."""


class DegenerateError(LobqError, ValueError):
    """The requested statistic is undefined for this (degenerate) model."""


class CalibrationError(LobqError, ValueError):
    """A curve has no interior maximum, so peak matching is impossible."""
