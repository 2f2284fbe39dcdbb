class McxError(Exception):
    """Base class for all errors raised by mcx."""


class InvalidArgumentError(McxError, ValueError):
    pass


class InvalidRegimeError(McxError, ValueError):
    """Parameters describe a degenerate initial configuration."""


class DegenerateProcessError(McxError, ValueError):
    """Limit process has no excursion structure (kappa = 0 and no jumps)."""


class UnsupportedSizeError(McxError, ValueError):
    """Exact enumeration requested for a size where it blows up."""


class InsufficientSamplesError(McxError, RuntimeError):
    pass
