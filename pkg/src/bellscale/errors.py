"""Exception types shared across the package."""


class BellError(ValueError):
    """A violated precondition (bad input). Maps to CLI exit code 1."""


class StructureError(BellError):
    """The expression does not have the paired-partition shape."""


class CalibrationError(RuntimeError):
    """Neither sign variant reproduces the expected GHZ value."""


class ConvergenceError(RuntimeError):
    """An iterative solver failed to converge within its budget."""
