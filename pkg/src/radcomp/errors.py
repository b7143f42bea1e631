"""Exception types shared across the package."""


class InputError(ValueError):
    """Malformed or out-of-range input (CLI exit code 2)."""


class DomainError(InputError):
    """Argument outside the domain of the evaluated function."""


class SolverError(RuntimeError):
    """Numerical integration or root finding failed (CLI exit code 3)."""


class NotRepresentable(Exception):
    """A distance pair has no preimage in the closed upper half-surface."""

    def __init__(self, msg, pair=None):
        super().__init__(msg)
        self.pair = pair


class PerimeterViolation(InputError):
    """Triangle perimeter exceeds 2*ell of a closed reference surface."""
