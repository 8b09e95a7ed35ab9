"""Diagonal MIMO state space layers computed with a parallel scan."""

from s5lab.errors import FormatError, NumericalError, RejectedInputError, S5Error

__version__ = "0.1.0"

__all__ = ["FormatError", "NumericalError", "RejectedInputError", "S5Error", "__version__"]
