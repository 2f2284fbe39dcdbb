"""Multiplicative coalescent simulation lab.

Three equivalent representations of the multiplicative coalescent (exact
Markov chain, exponential-mark construction, breadth-first-walk random
graph), the Levy-type limit processes, and a statistics harness.
"""

__version__ = "0.1.0"

from .errors import (
    DegenerateProcessError,
    InsufficientSamplesError,
    InvalidArgumentError,
    InvalidRegimeError,
    McxError,
    UnsupportedSizeError,
)

__all__ = [
    "__version__",
    "McxError",
    "InvalidArgumentError",
    "InvalidRegimeError",
    "DegenerateProcessError",
    "UnsupportedSizeError",
    "InsufficientSamplesError",
]
