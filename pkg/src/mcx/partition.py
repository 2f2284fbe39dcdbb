"""Set partitions of block indices and partition-valued trajectories.

Canonical form: each block is a sorted tuple of 0-based indices and blocks
are ordered by their smallest element.  For vectorised batches a partition of
``{0..n-1}`` is encoded as the label vector ``lab[i] = min(block of i)``,
packed into one integer ``sum_i lab[i] * n**i``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidArgumentError


@dataclass(frozen=True)
class Partition:
    blocks: tuple
    block_mass: tuple

    @classmethod
    def from_blocks(cls, blocks: Iterable[Iterable[int]], masses: Sequence[float]) -> "Partition":
        canon = sorted((tuple(sorted(int(i) for i in b)) for b in blocks), key=lambda b: b[0])
        m = np.asarray(masses, dtype=float)
        return cls(tuple(canon), tuple(float(m[list(b)].sum()) for b in canon))

    @classmethod
    def singletons(cls, masses: Sequence[float]) -> "Partition":
        return cls.from_blocks(([i] for i in range(len(masses))), masses)

    @classmethod
    def from_labels(cls, labels: Sequence[int], masses: Sequence[float]) -> "Partition":
        groups: dict = {}
        for i, lab in enumerate(labels):
            groups.setdefault(int(lab), []).append(i)
        return cls.from_blocks(groups.values(), masses)

    @property
    def n(self) -> int:
        return sum(len(b) for b in self.blocks)

    @property
    def key(self) -> tuple:
        return self.blocks

    def labels(self) -> np.ndarray:
        lab = np.empty(self.n, dtype=np.int64)
        for b in self.blocks:
            lab[list(b)] = b[0]
        return lab

    def code(self) -> int:
        return int(encode_labels(self.labels()[None, :])[0])

    def sizes(self) -> tuple:
        """Block masses sorted non-increasing."""
        return tuple(sorted(self.block_mass, reverse=True))

    def is_coarsening_of(self, finer: "Partition") -> bool:
        lab = self.labels()
        return all(len({int(lab[i]) for i in b}) == 1 for b in finer.blocks)

    def merged(self, a: int, b: int, masses: Sequence[float]) -> "Partition":
        """Partition with blocks number ``a`` and ``b`` merged into one."""
        if a == b:
            raise InvalidArgumentError("cannot merge a block with itself")
        blocks = [blk for k, blk in enumerate(self.blocks) if k not in (a, b)]
        blocks.append(self.blocks[a] + self.blocks[b])
        return Partition.from_blocks(blocks, masses)


@dataclass(frozen=True)
class Trajectory:
    """Merge times and the state after each merge; ``states[0]`` is time 0."""

    times: tuple
    states: tuple

    def state_at(self, s: float) -> Partition:
        k = int(np.searchsorted(np.asarray(self.times, dtype=float), s, side="right"))
        return self.states[k]

    @property
    def first_merge(self) -> float:
        return self.times[0] if self.times else float("inf")


def encode_labels(labels: np.ndarray) -> np.ndarray:
    """Pack rows of min-element labels into integer codes."""
    labels = np.asarray(labels, dtype=np.int64)
    n = labels.shape[1]
    weights = n ** np.arange(n, dtype=np.int64)
    return labels @ weights


def decode(code: int, n: int) -> np.ndarray:
    lab = np.empty(n, dtype=np.int64)
    for i in range(n):
        code, lab[i] = divmod(int(code), n)
    return lab


def code_to_partition(code: int, masses: Sequence[float]) -> Partition:
    return Partition.from_labels(decode(code, len(masses)), masses)


def min_labels_from_clusters(order: np.ndarray, cluster: np.ndarray) -> np.ndarray:
    """Min-element labels from per-position cluster ids.

    ``order[r, k]`` is the block index at position ``k`` of replica ``r`` and
    ``cluster[r, k]`` the cluster id of that position.
    """
    order = np.asarray(order)
    R, n = order.shape
    rows = np.repeat(np.arange(R), n)
    mins = np.full((R, n), n, dtype=np.int64)
    np.minimum.at(mins, (rows, cluster.ravel()), order.ravel())
    labels = np.empty((R, n), dtype=np.int64)
    labels[rows, order.ravel()] = mins[rows, cluster.ravel()]
    return labels


@dataclass(frozen=True)
class SortedLengths:
    """Non-increasing vector of positive masses (component or excursion lengths)."""

    lengths: np.ndarray

    def __post_init__(self):
        arr = np.sort(np.asarray(self.lengths, dtype=float).reshape(-1))[::-1].copy()
        if arr.size and arr[-1] <= 0:
            raise InvalidArgumentError("lengths must be > 0")
        arr.setflags(write=False)
        object.__setattr__(self, "lengths", arr)

    def __len__(self) -> int:
        return int(self.lengths.size)

    def __getitem__(self, k):
        return self.lengths[k]

    def __array__(self, dtype=None, copy=None):
        return self.lengths if dtype is None else self.lengths.astype(dtype)

    def top(self, k: int) -> np.ndarray:
        """First ``k`` entries, zero-padded."""
        out = np.zeros(k)
        m = min(k, self.lengths.size)
        out[:m] = self.lengths[:m]
        return out

    def total(self) -> float:
        return float(self.lengths.sum())
