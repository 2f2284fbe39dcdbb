"""Breadth-first walk construction of the time-q random graph.

Vertices are explored in breadth-first order.  While vertex ``v(i)`` is
explored the walk drifts at rate -1 over an interval of length ``x_{v(i)}``
and jumps by ``x_v`` at time ``U_{v(i),v}`` for every new child ``v``.  A
component is exhausted when the walk falls to its starting level minus the
root mass; the next root is drawn by size-biased sampling.

Implementation notes:

* Unused vertices are grouped by mass value.  For each explored vertex the
  number of children per class is binomial, the children are drawn uniformly
  from the class, and their ``U`` values are exponentials truncated to
  ``[0, x_{v(i)}]``.  Memory is O(n); near-critical configurations with few
  distinct masses cost O(n + edges).
* Roots are drawn through a Fenwick tree of per-class remaining mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import MassConfig, as_config, sigma
from .errors import InvalidArgumentError
from .partition import Partition, SortedLengths, encode_labels
from .rng import as_generator, stream

SMALL_CLASS_COUNT = 16


@dataclass(frozen=True)
class SkeletonPath:
    """Cadlag piecewise-linear path with finitely many jumps.

    ``slopes[k]`` is the drift on ``[breakpoints[k], breakpoints[k+1])``.
    Jumps are nonzero; a jump at time ``t`` is included in the value at ``t``.
    """

    breakpoints: np.ndarray
    slopes: np.ndarray
    jump_times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    jump_sizes: np.ndarray = field(default_factory=lambda: np.zeros(0))
    origin: float = 0.0

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=float)
        sl = np.asarray(self.slopes, dtype=float)
        jt = np.asarray(self.jump_times, dtype=float)
        js = np.asarray(self.jump_sizes, dtype=float)
        if b.ndim != 1 or b.size < 2 or np.any(np.diff(b) < 0):
            raise InvalidArgumentError("breakpoints must be a non-decreasing list of >= 2 times")
        if sl.size != b.size - 1:
            raise InvalidArgumentError("need one slope per interval")
        if jt.shape != js.shape:
            raise InvalidArgumentError("jump times and sizes must match")
        if jt.size and np.any(np.diff(jt) < 0):
            order = np.argsort(jt, kind="stable")
            jt, js = jt[order], js[order]
        for a in (b, sl, jt, js):
            a.setflags(write=False)
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "slopes", sl)
        object.__setattr__(self, "jump_times", jt)
        object.__setattr__(self, "jump_sizes", js)

    @property
    def start(self) -> float:
        return float(self.breakpoints[0])

    @property
    def end(self) -> float:
        return float(self.breakpoints[-1])

    def _drift(self, s: np.ndarray) -> np.ndarray:
        b = self.breakpoints
        acc = np.concatenate([[0.0], np.cumsum(self.slopes * np.diff(b))])
        s = np.clip(s, b[0], b[-1])
        k = np.clip(np.searchsorted(b, s, side="right") - 1, 0, self.slopes.size - 1)
        return acc[k] + self.slopes[k] * (s - b[k])

    def _jumps(self, s: np.ndarray, side: str) -> np.ndarray:
        if self.jump_times.size == 0:
            return np.zeros_like(s)
        csum = np.concatenate([[0.0], np.cumsum(self.jump_sizes)])
        return csum[np.searchsorted(self.jump_times, s, side=side)]

    def value(self, s):
        """Path value at ``s`` (jumps at ``s`` included)."""
        arr = np.asarray(s, dtype=float)
        out = self.origin + self._drift(arr) + self._jumps(arr, "right")
        return float(out) if out.ndim == 0 else out

    def left_limit(self, s):
        arr = np.asarray(s, dtype=float)
        out = self.origin + self._drift(arr) + self._jumps(arr, "left")
        return float(out) if out.ndim == 0 else out

    def scaled(self, factor: float) -> "SkeletonPath":
        return SkeletonPath(
            self.breakpoints,
            self.slopes * factor,
            self.jump_times,
            self.jump_sizes * factor,
            self.origin * factor,
        )

    def _combine(self, other: "SkeletonPath", sign: float) -> "SkeletonPath":
        if not (np.isclose(self.start, other.start) and np.isclose(self.end, other.end)):
            raise InvalidArgumentError("paths must share their time domain")
        b = np.union1d(self.breakpoints, other.breakpoints)
        mid = 0.5 * (b[:-1] + b[1:])
        slopes = self._slope_at(mid) + sign * other._slope_at(mid)
        jt = np.concatenate([self.jump_times, other.jump_times])
        js = np.concatenate([self.jump_sizes, sign * other.jump_sizes])
        times, inv = np.unique(jt, return_inverse=True)
        sizes = np.zeros(times.size)
        np.add.at(sizes, inv, js)
        keep = sizes != 0
        return SkeletonPath(b, slopes, times[keep], sizes[keep], self.origin + sign * other.origin)

    def _slope_at(self, s: np.ndarray) -> np.ndarray:
        k = np.clip(np.searchsorted(self.breakpoints, s, side="right") - 1, 0, self.slopes.size - 1)
        return self.slopes[k]

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def event_times(self) -> np.ndarray:
        return np.union1d(self.breakpoints, self.jump_times)

    def points(self) -> list:
        """``(time, value)`` rows at breakpoints and jumps; a jump gives two rows."""
        rows = []
        for t in self.event_times():
            left, right = self.left_limit(t), self.value(t)
            if left != right:
                rows.append((float(t), float(left)))
            rows.append((float(t), float(right)))
        return rows


class FenwickTree:
    """Prefix sums over non-negative weights with log-time update and search."""

    def __init__(self, weights):
        w = [float(v) for v in weights]
        self.size = len(w)
        tree = [0.0] + w
        for j in range(1, self.size + 1):
            parent = j + (j & -j)
            if parent <= self.size:
                tree[parent] += tree[j]
        self.tree = tree
        self._top = 1 << (self.size.bit_length() - 1) if self.size else 0

    def add(self, index: int, delta: float) -> None:
        j = index + 1
        tree = self.tree
        while j <= self.size:
            tree[j] += delta
            j += j & -j

    def prefix(self, index: int) -> float:
        """Sum of weights ``[0, index)``."""
        j, s = index, 0.0
        while j > 0:
            s += self.tree[j]
            j -= j & -j
        return s

    def total(self) -> float:
        return self.prefix(self.size)

    def find(self, target: float) -> int:
        """Smallest index whose inclusive prefix sum exceeds ``target``."""
        j, half = 0, self._top
        tree = self.tree
        while half:
            k = j + half
            if k <= self.size and tree[k] <= target:
                j = k
                target -= tree[k]
            half >>= 1
        return min(j, self.size - 1)


@dataclass(frozen=True)
class BfwResult:
    walk: SkeletonPath
    order: tuple
    birth: tuple
    component_spans: tuple
    surplus_edges: tuple
    tau: tuple
    q: float
    roots: frozenset

    def birth_of(self) -> dict:
        return {v: b for v, b in zip(self.order, self.birth)}

    def partition(self, masses) -> Partition:
        return Partition.from_blocks((members for _, _, members in self.component_spans), masses)


def _truncated_exp(rng, rate: float, upper: float, size: int) -> np.ndarray:
    """Exp(rate) conditioned on being <= upper, by inversion."""
    v = rng.random(size)
    return -np.log1p(v * math.expm1(-rate * upper)) / rate


class _MassClasses:
    """Vertices grouped by mass value; built once per configuration."""

    def __init__(self, x: MassConfig):
        self.masses = x.masses
        self.mass_list = x.masses.tolist()
        self.n = x.n
        self.class_arr, class_of = np.unique(x.masses, return_inverse=True)
        self.class_mass = self.class_arr.tolist()
        self.pools = [[] for _ in self.class_mass]
        for v, c in enumerate(class_of.tolist()):
            self.pools[c].append(v)


def build_bfw(x: MassConfig, q: float, seed, surplus: bool = True) -> BfwResult:
    """Breadth-first walk and random graph at time ``q``.

    ``surplus=False`` skips drawing the non-tree edges; the walk and the
    components do not depend on them.
    """
    x = as_config(x)
    if not q > 0:
        raise InvalidArgumentError("q must be > 0")
    order, birth, tau, jump_t, jump_s, spans, surplus_edges, roots = _explore(
        _MassClasses(x), q, as_generator(seed), surplus
    )
    walk = SkeletonPath(
        np.asarray(tau),
        -np.ones(x.n),
        np.asarray(jump_t),
        np.asarray(jump_s),
    )
    return BfwResult(
        walk=walk,
        order=tuple(order),
        birth=tuple(birth),
        component_spans=tuple(spans),
        surplus_edges=tuple(surplus_edges),
        tau=tuple(tau[1:]),
        q=float(q),
        roots=frozenset(roots),
    )


def _explore(mc: _MassClasses, q: float, rng, surplus: bool):
    masses = mc.masses
    mass_list = mc.mass_list
    n = mc.n
    class_arr = mc.class_arr
    class_mass = mc.class_mass
    K = len(class_mass)
    pools = [list(p) for p in mc.pools]
    counts = [len(p) for p in pools]
    fen = FenwickTree([m * c for m, c in zip(class_mass, counts)])

    def take(c: int, idx: int) -> int:
        # swap-remove keeps every pool dense
        pool = pools[c]
        v = pool[idx]
        last = pool.pop()
        if last != v:
            pool[idx] = last
        counts[c] -= 1
        fen.add(c, -class_mass[c])
        return v

    order: list = []
    birth: list = []
    tau = [0.0]
    jump_t: list = []
    jump_s: list = []
    spans: list = []
    surplus_edges: list = []
    roots: set = set()
    t = 0.0
    i = 0
    comp_start_idx = 0
    comp_start_t = 0.0
    while i < n:
        if i == len(order):
            # component exhausted: size-biased choice of the next root
            c = fen.find(rng.random() * fen.total())
            if counts[c] == 0:
                # accumulated rounding in the tree; redo the draw exactly
                w = np.asarray(counts) * class_arr
                c = int(np.searchsorted(np.cumsum(w), rng.random() * w.sum(), side="right"))
                c = min(c, int(np.flatnonzero(counts)[-1]))
            v = take(c, int(rng.integers(counts[c])))
            order.append(v)
            birth.append(t)
            roots.add(v)
            comp_start_idx, comp_start_t = i, t
        v = order[i]
        a = mass_list[v]
        if surplus and len(order) > i + 1:
            queued = np.asarray(order[i + 1 :])
            hit = rng.random(queued.size) < -np.expm1(-q * a * masses[queued])
            surplus_edges.extend((v, int(w)) for w in queued[hit])
        if K <= SMALL_CLASS_COUNT:
            draws = []
            for c in range(K):
                if counts[c]:
                    kc = int(rng.binomial(counts[c], -math.expm1(-q * a * class_mass[c])))
                    if kc:
                        draws.append((c, kc))
        else:
            cnt = np.asarray(counts)
            live = np.flatnonzero(cnt)
            kk = rng.binomial(cnt[live], -np.expm1(-q * a * class_arr[live]))
            draws = [(int(c), int(kc)) for c, kc in zip(live[kk > 0], kk[kk > 0])]
        if draws:
            kids = []
            for c, kc in draws:
                us = _truncated_exp(rng, q * class_mass[c], a, kc)
                for u in us.tolist():
                    kids.append((u, take(c, int(rng.integers(counts[c])))))
            kids.sort()
            for u, w in kids:
                order.append(w)
                birth.append(t + u)
                jump_t.append(t + u)
                jump_s.append(mass_list[w])
        t += a
        tau.append(t)
        i += 1
        if i == len(order):
            members = frozenset(order[comp_start_idx:i])
            spans.append((comp_start_t, t, members))

    return order, birth, tau, jump_t, jump_s, spans, surplus_edges, roots


def components(result: BfwResult) -> SortedLengths:
    """Component masses sorted non-increasing (span lengths)."""
    return SortedLengths(np.array([end - start for start, end, _ in result.component_spans]))


def excursion_scan(walk: SkeletonPath) -> SortedLengths:
    """Component masses read off the walk alone.

    A component started at breakpoint ``t0`` ends at the first later
    breakpoint where the walk has dropped by the length of the first vertex
    interval (the root mass).  Uses only the path and its breakpoints.
    """
    b = walk.breakpoints
    vals = walk.value(b)
    out = []
    k = 0
    K = b.size - 1
    while k < K:
        target = vals[k] - (b[k + 1] - b[k])
        tol = 1e-9 * max(1.0, abs(target))
        j = k + 1
        while vals[j] > target + tol:
            j += 1
        out.append(b[j] - b[k])
        k = j
    return SortedLengths(np.asarray(out))


def decompose(
    result: BfwResult,
    x: MassConfig,
    m: int,
    q: float | None = None,
    zero_roots: bool = True,
):
    """Split the walk as ``Z = Y + R``.

    ``R`` has, for each of the ``m`` largest blocks, a jump of size ``x_i``
    at its birth time and drift ``-x_i**2 / sigma_2``.  With ``zero_roots``
    a block that is the first vertex of its component contributes no jump;
    without it every leading block jumps at its birth time.
    """
    x = as_config(x)
    if not 0 <= m <= x.n:
        raise InvalidArgumentError(f"m must lie in [0, {x.n}], got {m}")
    if q is not None and not math.isclose(q, result.q):
        raise InvalidArgumentError("q does not match the walk's q")
    s2 = sigma(x, 2)
    lead = np.arange(m)
    born = result.birth_of()
    times, sizes = [], []
    for i in lead:
        if zero_roots and int(i) in result.roots:
            continue
        times.append(born[int(i)])
        sizes.append(x.masses[i])
    drift = -float(np.sum(x.masses[:m] ** 2)) / s2
    Z = result.walk
    R = SkeletonPath(
        np.array([Z.start, Z.end]),
        np.array([drift]),
        np.asarray(times, dtype=float),
        np.asarray(sizes, dtype=float),
    )
    return Z - R, R


def rescale(p: SkeletonPath, sigma2: float) -> SkeletonPath:
    if not sigma2 > 0:
        raise InvalidArgumentError("sigma2 must be > 0")
    return p.scaled(1.0 / sigma2)


def component_codes(x: MassConfig, q: float, replicas: int, seed: int, first: int = 0) -> np.ndarray:
    """Partition codes of the time-q graph for replicas ``first .. first+replicas-1``.

    Replica ``r`` uses the stream ``(seed, r)``, the same one
    ``build_bfw(x, q, stream(seed, r), surplus=False)`` would use.
    """
    x = as_config(x)
    if not q > 0:
        raise InvalidArgumentError("q must be > 0")
    mc = _MassClasses(x)
    labels = np.empty((replicas, x.n), dtype=np.int64)
    for r in range(replicas):
        spans = _explore(mc, q, stream(seed, first + r), False)[5]
        row = labels[r]
        for _, _, members in spans:
            lo = min(members)
            for v in members:
                row[v] = lo
    return encode_labels(labels)
