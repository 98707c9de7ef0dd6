"""Exception types shared across the laboratory."""


class EpilabError(Exception):
    """Base class for all package-specific failures."""


class GeometryError(EpilabError):
    """Arc/domain geometry is invalid for the requested operation."""


class SupportMismatchError(EpilabError):
    """A trace carries mass outside the arcs it is claimed to live on."""


class ConsistencyError(EpilabError):
    """An internal invariant that should be unreachable was violated."""


class ValidationError(EpilabError):
    """Inputs violate a documented precondition."""


class ConfigError(EpilabError):
    """A configuration file or CLI flag set is malformed."""


class NumericalError(EpilabError):
    """A numerical routine failed to produce a usable result."""
