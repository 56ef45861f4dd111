"""Exception types shared across the package."""


class DilferroError(Exception):
    """Base class for package errors."""


class ParameterError(DilferroError, ValueError):
    """A parameter violates an operation's precondition."""


class CapacityError(DilferroError, ValueError):
    """A request exceeds a documented size cap (enumeration, degree, ...)."""


class StructureError(DilferroError, ValueError):
    """A symbolic object does not have the shape an operation requires."""
