"""Exception hierarchy. Each top-level class maps onto a CLI exit code."""


class GHZCSError(Exception):
    exit_code = 1


class InvalidConfigError(GHZCSError, ValueError):
    exit_code = 2


class InvalidSizeError(InvalidConfigError):
    pass


class InvalidPairError(InvalidConfigError):
    pass


class CircuitStateError(InvalidConfigError):
    """Operation not allowed in the circuit's current state (e.g. measured twice)."""


class ResourceLimitError(GHZCSError):
    exit_code = 3


class EmptyPostSelectionError(GHZCSError):
    exit_code = 4

    def __init__(self, message, retained_fraction=0.0):
        super().__init__(message)
        self.retained_fraction = retained_fraction


class RecoveryDegeneracyError(GHZCSError):
    exit_code = 5


class AmplificationError(GHZCSError, ValueError):
    """Mitigation scaling too small to invert reliably."""
    exit_code = 2
