"""Exception taxonomy shared by all modules.

DataError covers malformed files, inconsistent shapes, and inputs that violate
an operation's contract; NumericsError covers degenerate geometry and unstable
arithmetic (collinear lights, diverging training loss, empty statistics). The
CLI maps them to distinct exit codes.
"""


class IrisPadError(Exception):
    """Base class for all errors raised by this package."""


class DataError(IrisPadError):
    """Malformed or contract-violating input data or files."""


class NumericsError(IrisPadError):
    """Numerically degenerate or unstable computation."""
