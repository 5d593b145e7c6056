"""Exception hierarchy shared by all modules.

The CLI maps InputError to exit code 3 and NumericsError to exit code 2.
"""


class FptError(Exception):
    pass


class InputError(FptError, ValueError):
    """Malformed or out-of-contract input."""


class NumericsError(FptError, ArithmeticError):
    """A numerical procedure failed (overflow, bracket exhaustion,
    instability); carries diagnostic context in the message."""
