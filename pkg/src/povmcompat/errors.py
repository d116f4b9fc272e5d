"""Exception types shared across the package."""


class PovmCompatError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(PovmCompatError, ValueError):
    """Matrix shape or dimension mismatch."""


class HermiticityError(PovmCompatError, ValueError):
    """An operation required a Hermitian matrix and did not get one."""


class PositivityError(PovmCompatError, ValueError):
    """An operation required a positive semidefinite matrix or an effect."""


class OrderError(PovmCompatError, ValueError):
    """A Loewner-order precondition (A <= B) was violated."""


class InvalidObservableError(PovmCompatError, ValueError):
    """Effects do not form a valid observable; carries the diagnostics."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class InconsistentConstraintsError(PovmCompatError, ValueError):
    """The affine constraint system has no solution (structurally infeasible)."""


class NotApplicableError(PovmCompatError, ValueError):
    """A construction's applicability conditions failed; carries the residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class CapExceededError(PovmCompatError, ValueError):
    """An enumeration exceeded its configured cap."""


class InputError(PovmCompatError, ValueError):
    """Malformed file or JSON payload handed to the CLI."""
