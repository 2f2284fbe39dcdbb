"""Initial mass configurations and their moment functionals."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidArgumentError, InvalidRegimeError

DEFAULT_THRESHOLD = 0.1
REPORT_LEADING = 16


@dataclass(frozen=True)
class MassConfig:
    """Finite non-increasing vector of positive block masses.

    Block ``i`` (0-based) has mass ``masses[i]``.  The array is stored
    read-only so instances can be shared between workers.
    """

    masses: np.ndarray

    def __post_init__(self):
        arr = np.array(self.masses, dtype=float).reshape(-1)
        if arr.size == 0:
            raise InvalidArgumentError("a mass configuration needs at least one block")
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
            raise InvalidArgumentError("block masses must be finite and > 0")
        if np.any(np.diff(arr) > 0):
            raise InvalidArgumentError("block masses must be sorted non-increasing")
        arr.setflags(write=False)
        object.__setattr__(self, "masses", arr)

    @classmethod
    def from_values(cls, values: Iterable[float]) -> "MassConfig":
        """Build a configuration from masses in any order."""
        return cls(np.sort(np.asarray(list(values), dtype=float))[::-1])

    @property
    def n(self) -> int:
        return int(self.masses.size)

    def __len__(self) -> int:
        return self.n

    def __iter__(self):
        return iter(self.masses.tolist())

    def __eq__(self, other):
        if not isinstance(other, MassConfig):
            return NotImplemented
        return np.array_equal(self.masses, other.masses)

    def __hash__(self):
        return hash(self.masses.tobytes())


@dataclass(frozen=True)
class RegimeParams:
    """Limit-process parameters: variance scale, time offset, dust sequence.

    Zero entries of ``c`` are dropped; an exponential clock with rate 0 never
    rings, so such a jump never occurs.
    """

    kappa: float = 1.0
    t: float = 0.0
    c: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if not (self.kappa >= 0 and math.isfinite(self.kappa)):
            raise InvalidArgumentError(f"kappa must be finite and >= 0, got {self.kappa}")
        if not math.isfinite(self.t):
            raise InvalidArgumentError("t must be finite")
        c = tuple(float(v) for v in self.c)
        if any(not math.isfinite(v) or v < 0 for v in c):
            raise InvalidArgumentError("dust sequence entries must be finite and >= 0")
        if any(b > a for a, b in zip(c, c[1:])):
            raise InvalidArgumentError("dust sequence c must be sorted non-increasing")
        object.__setattr__(self, "c", tuple(v for v in c if v > 0))
        object.__setattr__(self, "kappa", float(self.kappa))
        object.__setattr__(self, "t", float(self.t))

    def cube_sum(self) -> float:
        return float(sum(v**3 for v in self.c))


@dataclass(frozen=True)
class MomentReport:
    sigma1: float
    sigma2: float
    sigma3: float
    ratio3: float
    max_scaled: tuple


def sigma(x: MassConfig, r: int) -> float:
    """Moment functional ``sum_i x_i**r`` for r in {1, 2, 3}."""
    if r not in (1, 2, 3):
        raise InvalidArgumentError(f"sigma is defined for r in {{1, 2, 3}}, got {r}")
    return float(np.sum(x.masses**r))


def default_l(n: int, params: RegimeParams) -> int:
    """Number of macroscopic blocks to include at size ``n``.

    kappa > 0: floor(n**(1/8)), capped at len(c).  kappa = 0: smallest l with
    sum_{j<=l} c_j**2 >= n**(1/3), or all of c if that never happens.
    """
    if params.kappa > 0:
        return min(len(params.c), int(math.floor(n ** 0.125)))
    if not params.c:
        raise InvalidRegimeError("kappa = 0 requires a non-empty dust sequence c")
    target = n ** (1.0 / 3.0)
    acc = 0.0
    for j, cj in enumerate(params.c, start=1):
        acc += cj * cj
        if acc >= target:
            return j
    return len(params.c)


def make_standard_config(n: int, params: RegimeParams, l: int | None = None) -> MassConfig:
    """Near-critical configuration whose moments approach (kappa, c).

    kappa > 0: ``l`` entries ``c_j kappa^(-2/3) n^(-1/3)`` together with ``n``
    entries ``kappa^(-1/3) n^(-2/3)``.  kappa = 0: only the ``l`` entries
    ``c_j n^(-1/3)``.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidArgumentError(f"n must be a positive integer, got {n!r}")
    if l is None:
        l = default_l(n, params)
    if l < 0 or l > len(params.c):
        raise InvalidArgumentError(f"l must lie in [0, {len(params.c)}], got {l}")
    c = np.asarray(params.c[:l], dtype=float)
    if params.kappa > 0:
        big = c * params.kappa ** (-2.0 / 3.0) * n ** (-1.0 / 3.0)
        dust = np.full(n, params.kappa ** (-1.0 / 3.0) * n ** (-2.0 / 3.0))
        masses = np.concatenate([big, dust])
    else:
        if l < 1:
            raise InvalidRegimeError(
                "kappa = 0 needs a non-empty dust sequence and l >= 1; "
                "the configuration would be empty"
            )
        masses = c * n ** (-1.0 / 3.0)
    return MassConfig.from_values(masses)


def moment_report(x: MassConfig) -> MomentReport:
    s1, s2, s3 = (sigma(x, r) for r in (1, 2, 3))
    lead = x.masses[: min(x.n, REPORT_LEADING)] / s2
    return MomentReport(
        sigma1=s1,
        sigma2=s2,
        sigma3=s3,
        ratio3=s3 / s2**3,
        max_scaled=tuple(float(v) for v in lead),
    )


def choose_m(x: MassConfig, threshold: float = DEFAULT_THRESHOLD) -> int:
    """Count of blocks with ``x_i >= threshold * sigma_2(x)``.

    These leading blocks are tracked individually in the jump part of the
    walk decomposition; the rest is treated as dust.
    """
    if not 0 < threshold < 1:
        raise InvalidArgumentError(f"threshold must lie in (0, 1), got {threshold}")
    cut = threshold * sigma(x, 2)
    # masses are sorted non-increasing, so the count is a split index
    return int(np.count_nonzero(x.masses >= cut))


def dust_moments(x: MassConfig, m: int, t: float = 0.0) -> dict:
    """Moment sums over the dust blocks ``i >= m`` at time ``q = 1/sigma_2 + t``.

    ``dust_share`` = sum x_i^2 / sigma_2 tends to 1 and ``kappa_estimate`` =
    q * sum x_i^3 / sigma_2^2 tends to kappa under the near-critical
    hypotheses.
    """
    if not 0 <= m <= x.n:
        raise InvalidArgumentError(f"m must lie in [0, {x.n}], got {m}")
    s2 = sigma(x, 2)
    q = 1.0 / s2 + t
    dust = x.masses[m:]
    return {
        "q": q,
        "dust_share": float(np.sum(dust**2) / s2),
        "kappa_estimate": float(q * np.sum(dust**3) / s2**2),
    }


def concat(x: MassConfig, y: MassConfig) -> MassConfig:
    return MassConfig.from_values(np.concatenate([x.masses, y.masses]))


def as_config(x: MassConfig | Sequence[float]) -> MassConfig:
    return x if isinstance(x, MassConfig) else MassConfig(np.asarray(x, dtype=float))
