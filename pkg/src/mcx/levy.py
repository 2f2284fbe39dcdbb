"""Limit processes: the jump process V^c, the walk W^{kappa,t,c}, its
reflection above past minima and the ordered excursion lengths.

Grid conventions: a path on horizon ``h`` with spacing ``step`` is stored at
the ``ceil(h/step) + 1`` points ``k * step``.  Brownian increments are exact
Gaussians, so the values at grid points carry no discretisation error; a jump
at time ``u`` shows up at the first grid point ``>= u``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import RegimeParams
from .errors import DegenerateProcessError, InvalidArgumentError
from .partition import SortedLengths
from .rng import CHUNK_TAG, as_generator, chunks, stream

GRID_POINTS_LOG2 = 12
MIN_LENGTH_STEPS = 4
PATH_CHUNK = 512


@dataclass(frozen=True)
class VcSample:
    """Jumps ``(times[j], sizes[j])`` before the horizon plus constant drift."""

    times: np.ndarray
    sizes: np.ndarray
    drift: float
    horizon: float

    def value(self, s):
        s = np.asarray(s, dtype=float)
        jumps = (self.times[None, :] <= s.reshape(-1, 1)) @ self.sizes if self.sizes.size else 0.0
        out = self.drift * s.reshape(-1) + jumps
        return float(out[0]) if s.ndim == 0 else out.reshape(s.shape)


@dataclass(frozen=True)
class GridPath:
    step: float
    values: np.ndarray
    jump_times: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if not self.step > 0:
            raise InvalidArgumentError("step must be > 0")
        v = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(v)):
            raise InvalidArgumentError("path values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def times(self) -> np.ndarray:
        return self.step * np.arange(self.values.size)

    @property
    def horizon(self) -> float:
        return self.step * (self.values.size - 1)

    def at(self, s: float) -> float:
        """Value at the first grid point >= s."""
        return float(self.values[min(int(math.ceil(s / self.step - 1e-12)), self.values.size - 1)])


@dataclass(frozen=True)
class ExcursionResult:
    lengths: SortedLengths
    truncated: bool
    open_length: float
    zero_measure: float
    jump_starts: int = 0

    def largest(self, include_open: bool = False) -> float:
        best = self.lengths[0] if len(self.lengths) else 0.0
        return max(best, self.open_length) if include_open else float(best)


def grid_size(horizon: float, step: float) -> int:
    """Number of grid intervals covering ``[0, horizon]``."""
    return int(math.ceil(horizon / step - 1e-9))


def default_horizon(params: RegimeParams) -> float:
    """Five times a rough scale for the largest excursion.

    kappa > 0: substituting s = kappa^(-1/3) u maps W^{kappa,t} onto the
    kappa = 1 walk with time offset t kappa^(-2/3), whose largest excursion is
    about max(1, 2t).  kappa = 0: the total jump mass divided by the net
    downward drift, or the slowest jump clock if that is longer.
    """
    if params.kappa > 0:
        t_eff = params.t * params.kappa ** (-2.0 / 3.0)
        scale = params.kappa ** (-1.0 / 3.0) * max(1.0, 2.0 * t_eff)
    else:
        if not params.c:
            raise DegenerateProcessError("kappa = 0 with empty c has no excursions")
        c = np.asarray(params.c)
        down = max(float(np.sum(c**2)) - params.t, 0.1 * float(np.sum(c**2)))
        scale = max(float(c.sum()) / down, 1.0 / float(c[-1]))
    return 5.0 * scale


def default_step(horizon: float) -> float:
    return horizon / 2**GRID_POINTS_LOG2


def truncation_tail(c, keep: int) -> float:
    """Cube sum of the dropped tail ``c[keep:]``; bounds the truncation error."""
    c = np.asarray(c, dtype=float)
    return float(np.sum(c[keep:] ** 3))


def sample_Vc(c, horizon: float, seed) -> VcSample:
    """Jumps of size c_j at independent Exp(rate c_j) times, drift -sum c_j^2."""
    rng = as_generator(seed)
    c = np.asarray([v for v in c if v > 0], dtype=float)
    if not horizon > 0:
        raise InvalidArgumentError("horizon must be > 0")
    xi = rng.exponential(size=c.size) / c if c.size else np.zeros(0)
    keep = xi <= horizon
    order = np.argsort(xi[keep], kind="stable")
    return VcSample(xi[keep][order], c[keep][order], -float(np.sum(c**2)), float(horizon))


def _two_streams(seed):
    if isinstance(seed, np.random.Generator):
        g, v = seed.spawn(2)
        return g, v
    return stream(seed, 0), stream(seed, 1)


def _gauss_part(params: RegimeParams, n_steps: int, step: float, rng, size=None) -> np.ndarray:
    shape = (n_steps,) if size is None else (size, n_steps)
    s = step * np.arange(n_steps + 1)
    drift = params.t * s - 0.5 * params.kappa * s**2
    if params.kappa == 0:
        base = np.zeros(shape[:-1] + (n_steps + 1,))
    else:
        inc = rng.normal(0.0, math.sqrt(step), size=shape)
        base = np.zeros(shape[:-1] + (n_steps + 1,))
        base[..., 1:] = np.cumsum(inc, axis=-1) * math.sqrt(params.kappa)
    return base + drift


def _jump_part(c: np.ndarray, n_steps: int, step: float, rng, size: int):
    """V^c on the grid for ``size`` replicas; also returns jump grid indices."""
    s = step * np.arange(n_steps + 1)
    out = np.tile(-float(np.sum(c**2)) * s, (size, 1))
    idx = np.full((size, c.size), n_steps + 1, dtype=np.int64)
    if c.size:
        xi = rng.exponential(size=(size, c.size)) / c
        k = np.ceil(xi / step - 1e-12).astype(np.int64)
        idx = np.where(k <= n_steps, k, n_steps + 1)
        for j, cj in enumerate(c):
            bump = np.zeros((size, n_steps + 2))
            bump[np.arange(size), idx[:, j]] = cj
            out += np.cumsum(bump, axis=1)[:, : n_steps + 1]
    return out, idx


def sample_W(params: RegimeParams, horizon: float, step: float, seed) -> GridPath:
    """W(s) = sqrt(kappa) B(s) + t s - kappa s^2 / 2 + V^c(s) on a grid.

    The Brownian part and V^c draw from independent streams.
    """
    if params.kappa == 0 and not params.c:
        raise DegenerateProcessError("kappa = 0 with empty c: W is a pure drift without excursions")
    if not (horizon > 0 and step > 0):
        raise InvalidArgumentError("horizon and step must be > 0")
    g_rng, v_rng = _two_streams(seed)
    n_steps = grid_size(horizon, step)
    gauss = _gauss_part(params, n_steps, step, g_rng)
    vc = sample_Vc(params.c, n_steps * step, v_rng)
    s = step * np.arange(n_steps + 1)
    values = gauss + vc.value(s)
    return GridPath(step, values, tuple(zip(vc.times.tolist(), vc.sizes.tolist())))


def iter_W_chunks(params: RegimeParams, horizon: float, step: float, replicas: int, seed: int):
    """Yield ``(gauss, jumps, jump_index)`` per chunk of ``PATH_CHUNK`` paths.

    Chunk ``k`` uses streams ``(seed, CHUNK_TAG, k, 0)`` for the Brownian
    part and ``(..., 1)`` for the jumps.  Memory stays at one chunk.
    """
    if params.kappa == 0 and not params.c:
        raise DegenerateProcessError("kappa = 0 with empty c: W is a pure drift without excursions")
    n_steps = grid_size(horizon, step)
    c = np.asarray(params.c, dtype=float)
    for k, size in chunks(replicas, PATH_CHUNK):
        g = _gauss_part(params, n_steps, step, stream(seed, CHUNK_TAG, k, 0), size=size)
        j, idx = _jump_part(c, n_steps, step, stream(seed, CHUNK_TAG, k, 1), size)
        yield g, j, idx


def sample_W_batch(
    params: RegimeParams,
    horizon: float,
    step: float,
    replicas: int,
    seed: int,
    parts: bool = False,
):
    """Grid values of many independent W paths, shape (replicas, points).

    Streams as in :func:`iter_W_chunks`.  With ``parts=True`` returns
    ``(gauss, jumps, jump_index)`` separately; ``W = gauss + jumps``.
    """
    gs, js, ix = zip(*iter_W_chunks(params, horizon, step, replicas, seed))
    gauss, jumps, index = np.concatenate(gs), np.concatenate(js), np.concatenate(ix)
    if parts:
        return gauss, jumps, index
    return gauss + jumps


def reflect_values(w: np.ndarray) -> np.ndarray:
    """``w - running min`` along the last axis; the running min includes w[0]."""
    return w - np.minimum.accumulate(w, axis=-1)


def reflect(p: GridPath) -> GridPath:
    """B(s) = W(s) - min_{u<=s} W(u)."""
    return GridPath(p.step, reflect_values(p.values), p.jump_times)


def excursion_runs(b: np.ndarray):
    """Start indices (first positive point) and end indices (next zero)."""
    pos = b > 0
    edges = np.diff(pos.astype(np.int8))
    starts = np.flatnonzero(edges == 1) + 1
    ends = np.flatnonzero(edges == -1) + 1
    if pos[0]:
        starts = np.concatenate([[0], starts])
    return starts, ends


def excursions_values(
    b: np.ndarray,
    step: float,
    min_length: float | None = None,
    jump_index=None,
) -> ExcursionResult:
    b = np.asarray(b, dtype=float)
    if min_length is None:
        min_length = MIN_LENGTH_STEPS * step
    starts, ends = excursion_runs(b)
    open_length = 0.0
    truncated = starts.size > ends.size
    if truncated:
        open_length = (b.size - starts[-1]) * step
        starts = starts[:-1]
    lengths = (ends - starts) * step
    jump_starts = 0
    if jump_index is not None and len(jump_index):
        jump_starts = int(np.isin(starts, np.asarray(jump_index)).sum())
    zero_measure = float(np.count_nonzero(b <= 0)) * step
    return ExcursionResult(
        lengths=SortedLengths(lengths[lengths >= max(min_length, 1e-300)]),
        truncated=bool(truncated),
        open_length=float(open_length),
        zero_measure=zero_measure,
        jump_starts=jump_starts,
    )


def excursions(b: GridPath, min_length: float | None = None) -> ExcursionResult:
    """Ordered excursion lengths of a non-negative grid path.

    An excursion runs from the first grid point with ``b > 0`` after a zero to
    the next grid point with ``b = 0``.  Lengths below ``min_length`` (default
    four grid steps) are dropped.  An excursion still open at the horizon is
    reported in ``open_length`` and sets ``truncated``.  ``jump_starts``
    counts excursions whose first positive point is where a jump lands.
    """
    if np.any(b.values < 0):
        raise InvalidArgumentError("excursions need a non-negative path")
    jump_index = [int(math.ceil(t / b.step - 1e-12)) for t, _ in b.jump_times]
    return excursions_values(b.values, b.step, min_length, jump_index)


def largest_excursions(
    params: RegimeParams,
    replicas: int,
    seed: int,
    horizon: float | None = None,
    step: float | None = None,
    top: int = 3,
    max_extensions: int = 3,
):
    """Top excursion lengths of B^{kappa,t,c} over replicas.

    Replicas whose excursion is still open at the horizon are re-run with a
    doubled horizon (fresh streams) up to ``max_extensions`` times.  Returns
    ``(lengths[replicas, top], truncation_count)`` where the count is the
    number of replicas that were still open after the last extension.
    """
    horizon = default_horizon(params) if horizon is None else horizon
    step = default_step(horizon) if step is None else step
    out = np.zeros((replicas, top))
    todo = []
    r = 0
    for gauss, jumps, _ in iter_W_chunks(params, horizon, step, replicas, seed):
        for row in reflect_values(gauss + jumps):
            res = excursions_values(row, step)
            if res.truncated:
                todo.append(r)
            else:
                out[r] = res.lengths.top(top)
            r += 1
    truncated = 0
    for r in todo:
        h = horizon
        for attempt in range(1, max_extensions + 1):
            h *= 2
            path = sample_W(params, h, step, stream(seed, CHUNK_TAG - 1, r, attempt))
            res = excursions(reflect(path))
            if not res.truncated:
                break
        if res.truncated:
            truncated += 1
        out[r] = res.lengths.top(top)
    return out, truncated
