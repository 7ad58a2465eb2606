"""Exception hierarchy for rbtensor."""


class RbTensorError(Exception):
    """Base class for all errors raised by this package."""


class UnknownLevel(RbTensorError, KeyError):
    """An excited hyperfine level was requested that the level scheme lacks."""

    def __str__(self):
        return str(self.args[0]) if self.args else "unknown level"


class SchemeError(RbTensorError, ValueError):
    """A level-scheme data file is malformed or violates its invariants."""


class InvalidRange(RbTensorError, ValueError):
    """A detuning range or step is empty or inverted."""


class DegenerateState(RbTensorError, ValueError):
    """A mean vector is too short for the linearisation to be defined."""
