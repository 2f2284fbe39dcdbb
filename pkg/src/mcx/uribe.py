"""Exponential-mark (Uribe) construction of the multiplicative coalescent.

Block ``i`` carries an independent mark ``xi_i ~ Exp(rate x_i)``.  Sorting
the marks gives the size-biased order ``pi``.  At time ``s`` the residual of
the block in position ``k`` is ``xi_{pi_k} - s * (mass of positions < k)``.
Clusters are contiguous runs in mark order: position ``k`` opens a new
cluster iff its residual is a strict running maximum of the residual vector.

The record rule reproduces the two event identities it has to match: all
residuals increasing is exactly the no-merge event, and a single adjacent
pair (a, b) merges while the next position stays a record exactly when
``xi_next - min(xi_a, xi_b) > (x_a + x_b) s``.  Equivalence with the Markov
chain beyond those events is checked statistically in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from .config import MassConfig, as_config
from .errors import InsufficientSamplesError, InvalidArgumentError
from .partition import Partition, Trajectory, encode_labels, min_labels_from_clusters
from .rng import as_generator

MIN_ACCEPTED = 1000


@dataclass(frozen=True)
class ExpMarks:
    xi: np.ndarray
    pi: np.ndarray

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=float)
        pi = np.asarray(self.pi, dtype=np.int64)
        if np.unique(xi).size != xi.size:
            raise InvalidArgumentError("marks must be distinct")
        if not np.all(np.diff(xi[pi]) > 0):
            raise InvalidArgumentError("pi must sort the marks increasingly")
        xi.setflags(write=False)
        pi.setflags(write=False)
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "pi", pi)

    @classmethod
    def from_marks(cls, xi) -> "ExpMarks":
        xi = np.asarray(xi, dtype=float)
        return cls(xi, np.argsort(xi, kind="stable"))


@dataclass(frozen=True)
class ResidualVector:
    r: np.ndarray
    s: float


def sample_marks(x: MassConfig, seed) -> ExpMarks:
    x = as_config(x)
    rng = as_generator(seed)
    while True:
        xi = rng.exponential(size=x.n) / x.masses
        # ties have probability zero; redraw if floating point produces one
        if np.unique(xi).size == x.n:
            return ExpMarks.from_marks(xi)


def sample_marks_batch(x: MassConfig, replicas: int, seed) -> np.ndarray:
    """Marks for many replicas as an array of shape (replicas, n)."""
    x = as_config(x)
    rng = as_generator(seed)
    xi = rng.exponential(size=(int(replicas), x.n)) / x.masses
    srt = np.sort(xi, axis=1)
    tied = np.flatnonzero(np.any(np.diff(srt, axis=1) == 0, axis=1))
    for r in tied:
        xi[r] = sample_marks(x, rng).xi
    return xi


def _cumulative_before(x: MassConfig, pi) -> np.ndarray:
    w = x.masses[pi]
    return np.concatenate([[0.0], np.cumsum(w)[:-1]])


def residuals(x: MassConfig, marks: ExpMarks, s: float) -> ResidualVector:
    x = as_config(x)
    if s < 0:
        raise InvalidArgumentError("s must be >= 0")
    r = marks.xi[marks.pi] - s * _cumulative_before(x, marks.pi)
    return ResidualVector(r, float(s))


def _records(r: np.ndarray) -> np.ndarray:
    starts = np.ones(r.shape, dtype=bool)
    starts[..., 1:] = r[..., 1:] > np.maximum.accumulate(r, axis=-1)[..., :-1]
    return starts


def partition_at(x: MassConfig, marks: ExpMarks, s: float) -> Partition:
    x = as_config(x)
    r = residuals(x, marks, s).r
    cluster = np.cumsum(_records(r)) - 1
    groups = [[] for _ in range(cluster[-1] + 1)]
    for k, c in enumerate(cluster):
        groups[c].append(int(marks.pi[k]))
    return Partition.from_blocks(groups, x.masses)


def death_times(x: MassConfig, marks: ExpMarks) -> np.ndarray:
    """Time at which each mark-order position stops being a record.

    Entry ``k`` (k >= 1) is ``min_{i<k} (xi_k - xi_i) / (mass of positions
    i..k-1)``; entry 0 is ``inf`` since the first position always leads.
    O(n^2) overall.
    """
    x = as_config(x)
    xs = marks.xi[marks.pi]
    cum = np.concatenate([[0.0], np.cumsum(x.masses[marks.pi])])
    d = np.full(x.n, np.inf)
    for k in range(1, x.n):
        d[k] = np.min((xs[k] - xs[:k]) / (cum[k] - cum[:k]))
    return d


def merge_trajectory(x: MassConfig, marks: ExpMarks) -> Trajectory:
    """All merge times and states of the mark construction.

    A record, once dead, never revives, so sorting the death times gives the
    merge times and the boundaries alive after each merge give the state.
    """
    x = as_config(x)
    d = death_times(x, marks)
    order = np.argsort(d[1:], kind="stable") + 1
    alive = np.ones(x.n, dtype=bool)
    states = [Partition.singletons(x.masses)]
    for k in order:
        alive[k] = False
        cluster = np.cumsum(alive) - 1
        groups = [[] for _ in range(cluster[-1] + 1)]
        for pos, c in enumerate(cluster):
            groups[c].append(int(marks.pi[pos]))
        states.append(Partition.from_blocks(groups, x.masses))
    return Trajectory(tuple(float(v) for v in d[order]), tuple(states))


def first_merge_time(x: MassConfig, marks: ExpMarks) -> float:
    d = death_times(x, marks)
    return float(d[1:].min()) if d.size > 1 else float("inf")


# -- vectorised batches (small n) -------------------------------------------


def batch_order(xi: np.ndarray) -> np.ndarray:
    return np.argsort(xi, axis=1, kind="stable")


def batch_residuals(x: MassConfig, xi: np.ndarray, s: float) -> np.ndarray:
    """Residuals in mark order for each row of ``xi``."""
    x = as_config(x)
    order = batch_order(xi)
    w = x.masses[order]
    before = np.cumsum(w, axis=1) - w
    return np.take_along_axis(xi, order, axis=1) - s * before


def batch_partition_codes(x: MassConfig, xi: np.ndarray, s: float) -> np.ndarray:
    """Partition codes (see :mod:`mcx.partition`) at time ``s`` per row."""
    x = as_config(x)
    order = batch_order(xi)
    r = batch_residuals(x, xi, s)
    cluster = np.cumsum(_records(r), axis=1) - 1
    return encode_labels(min_labels_from_clusters(order, cluster))


def batch_first_merge(x: MassConfig, xi: np.ndarray) -> np.ndarray:
    """First merge time ``S`` per row (min over positions of the death time)."""
    x = as_config(x)
    order = batch_order(xi)
    xs = np.take_along_axis(xi, order, axis=1)
    cum = np.concatenate([np.zeros((xi.shape[0], 1)), np.cumsum(x.masses[order], axis=1)], axis=1)
    best = np.full(xi.shape[0], np.inf)
    n = x.n
    for k in range(1, n):
        slopes = (xs[:, k : k + 1] - xs[:, :k]) / (cum[:, k : k + 1] - cum[:, :k])
        best = np.minimum(best, slopes.min(axis=1))
    return best


def partition_codes(x: MassConfig, s: float, replicas: int, seed) -> np.ndarray:
    xi = sample_marks_batch(x, replicas, seed)
    return batch_partition_codes(x, xi, s)


@dataclass(frozen=True)
class ResidualReport:
    s: float
    replicas: int
    accepted: int
    ks_statistics: tuple
    ks_pvalues: tuple
    order_preserved: float

    def passed(self, alpha: float = 0.001) -> bool:
        return min(self.ks_pvalues) > alpha and self.order_preserved == 1.0


def residual_law_check(x: MassConfig, s: float, replicas: int, seed) -> ResidualReport:
    """Residual marks on the no-merge event versus fresh exponential marks.

    Conditions on ``S > s`` by rejection, then runs one-sample KS tests of
    each block's residual against ``Exp(rate x_i)`` and checks that residuals
    induce the same order as the marks.
    """
    x = as_config(x)
    if s < 0:
        raise InvalidArgumentError("s must be >= 0")
    xi = sample_marks_batch(x, replicas, seed)
    order = batch_order(xi)
    r = batch_residuals(x, xi, s)
    keep = np.all(np.diff(r, axis=1) > 0, axis=1)
    accepted = int(keep.sum())
    if accepted < MIN_ACCEPTED:
        raise InsufficientSamplesError(
            f"only {accepted} replicas with no merge by s={s}; need {MIN_ACCEPTED}"
        )
    order, r = order[keep], r[keep]
    by_block = np.empty_like(r)
    np.put_along_axis(by_block, order, r, axis=1)
    stats, pvals = [], []
    for i, rate in enumerate(x.masses):
        res = sps.kstest(by_block[:, i], "expon", args=(0.0, 1.0 / rate))
        stats.append(float(res.statistic))
        pvals.append(float(res.pvalue))
    same = np.all(np.argsort(by_block, axis=1, kind="stable") == order, axis=1)
    return ResidualReport(
        s=float(s),
        replicas=int(replicas),
        accepted=accepted,
        ks_statistics=tuple(stats),
        ks_pvalues=tuple(pvals),
        order_preserved=float(same.mean()),
    )


def diagram_rows(x: MassConfig, marks: ExpMarks) -> list:
    """Rows ``(k, xi_{pi_k}, mass before position k)`` for plotting the diagram."""
    x = as_config(x)
    before = _cumulative_before(x, marks.pi)
    return [(k, float(marks.xi[p]), float(before[k])) for k, p in enumerate(marks.pi)]
