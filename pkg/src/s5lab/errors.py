"""Exception types shared across the package."""


class S5Error(Exception):
    """Base class for all package errors."""


class RejectedInputError(S5Error, ValueError):
    """An argument violates an operation's precondition."""


class NumericalError(S5Error, ArithmeticError):
    """A computation failed numerically (non-convergence, NaN, singularity)."""


class FormatError(S5Error, ValueError):
    """A file or config could not be parsed.

    ``offset`` is the byte offset (binary files) and ``line`` the 1-based line
    number (text configs) where parsing failed, when known.
    """

    def __init__(self, message, offset=None, line=None):
        super().__init__(message)
        self.offset = offset
        self.line = line
