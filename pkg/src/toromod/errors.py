"""Exception hierarchy shared by every toromod module."""


class ToromodError(Exception):
    """Base class for all library errors."""


class InvalidComplexError(ToromodError, ValueError):
    """A complex violates its invariants or could not be parsed."""


class DegenerateComplexError(ToromodError):
    """The capacity energy is not coercive on this complex."""


class NotEdgeFineError(ToromodError, ValueError):
    """Some edge increment of a circle map is exactly one half turn."""


class FaceInconsistentError(ToromodError, ValueError):
    """Edge increments of a circle map do not close up around a face."""


class DegreeError(ToromodError, ValueError):
    """A circle map has the wrong degree for the requested operation."""


class NoAdmissibleError(ToromodError):
    """A family contains a member of zero mass: the modulus is infinite."""


class NotConvergedError(ToromodError):
    """An iterative solver stopped before meeting its tolerance.

    The partial result, when one exists, is attached as ``report``.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NotSeparatingError(ToromodError, ValueError):
    """An edge set misses some winding cycle."""


class EpsTooLargeError(ToromodError, ValueError):
    """The neighbourhood of a cut is wide enough to meet its own translate."""
