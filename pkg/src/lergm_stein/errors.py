"""Exception hierarchy shared by all modules."""


class LergmError(Exception):
    """Base class for model and numerical errors (CLI exit code 2)."""


class CapacityError(LergmError):
    """Exact enumeration requested on a subgraph with too many edge labels."""


class SamplingError(LergmError):
    """Degenerate-block rejection exceeded its retry cap."""


class NumericalError(LergmError):
    """A non-finite value appeared in an objective or gradient."""


class SingularityError(LergmError):
    """A moment matrix is too close to singular for its inverse square root."""


class GraphFormatError(LergmError, ValueError):
    """Malformed graph text file."""
