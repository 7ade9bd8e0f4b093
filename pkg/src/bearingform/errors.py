"""Exception types shared across the package."""


class BearingFormError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(BearingFormError, ValueError):
    """Malformed input: bad graph, bad configuration, bad constraints or file."""

    def __init__(self, message: str, location: str = ""):
        super().__init__(message)
        self.location = location


class DegenerateError(BearingFormError, ValueError):
    """A vector or edge is too short for its bearing to be defined."""

    def __init__(self, message: str, edge: tuple[int, int] | None = None):
        super().__init__(message)
        self.edge = edge


class NotRigidError(BearingFormError):
    """Bearing constraints do not ensure infinitesimal bearing rigidity."""


class InfeasibleError(BearingFormError):
    """No configuration realises the given bearing constraints."""


class CollisionError(DegenerateError):
    """Two agents came closer than allowed during a simulation."""

    def __init__(self, message: str, edge=None, time: float | None = None, step: int | None = None):
        super().__init__(message, edge)
        self.time = time
        self.step = step


class NumericError(BearingFormError, ArithmeticError):
    """The integrated state became non-finite."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step
