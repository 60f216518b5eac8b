"""Exception hierarchy.

Every input-validation failure derives from :class:`ChshLabError` so callers
(the CLI in particular) can separate bad input from internal faults.
"""


class ChshLabError(ValueError):
    """Base class for invalid input or an undefined quantity."""


class NegativeWeight(ChshLabError):
    pass


class NotNormalized(ChshLabError):
    pass


class DuplicateAtom(ChshLabError):
    pass


class MismatchedSpace(ChshLabError):
    """A random variable or event used with a space it was not built on."""


class NullEvent(ChshLabError):
    """Conditioning on an event of probability zero."""


class RangeViolation(ChshLabError):
    pass


class InvalidTable(ChshLabError):
    pass


class InvalidParams(ChshLabError):
    pass


class TargetOutOfRange(ChshLabError):
    pass


class EmptyCell(ChshLabError):
    """No trial landed on a setting pair, so its conditional estimate is undefined."""


class InconsistentMarginals(ChshLabError):
    pass


class PreconditionViolated(ChshLabError):
    pass


class InvariantViolation(AssertionError):
    """An internal consistency check failed; indicates a bug, not bad input."""
