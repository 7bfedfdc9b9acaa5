"""Exception hierarchy shared by every binscore module."""


class BinscoreError(Exception):
    """Base class for all errors raised by binscore."""


class DomainError(BinscoreError, ValueError):
    """An argument lies outside the domain of the operation."""


class DegeneratePanelError(DomainError):
    """A gambling panel has mean probability 0 or 1, or too few members."""


class NumericError(BinscoreError, ArithmeticError):
    """A computation could not produce a trustworthy number."""


class ConvergenceError(NumericError):
    """An iterative kernel ran out of iterations."""


class IndeterminateDifferenceError(NumericError):
    """A score difference of the form (-inf) - (-inf)."""


class DataError(BinscoreError, ValueError):
    """Malformed, duplicated, overlapping or misaligned input data."""
