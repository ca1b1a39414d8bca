"""Exception types raised by the package."""


class InputError(ValueError):
    """Malformed or inconsistent input (CLI exit code 2)."""


class InfeasibleError(ValueError):
    """A constraint system has no solution within tolerance."""


class ConvergenceError(RuntimeError):
    """An iterative routine stopped before meeting its tolerance."""
