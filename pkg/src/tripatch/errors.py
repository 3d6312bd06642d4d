"""Exception types shared across the package."""


class TripatchError(Exception):
    """Base class for all package errors."""


class InputError(TripatchError, ValueError):
    """Bad or inconsistent user input (CLI exit code 1)."""


class InvariantError(TripatchError, RuntimeError):
    """An internal invariant was breached (CLI exit code 2)."""
