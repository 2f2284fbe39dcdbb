import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcx.errors import InvalidArgumentError
from mcx.partition import (
    Partition,
    SortedLengths,
    Trajectory,
    code_to_partition,
    decode,
    encode_labels,
)

MASSES = (1.0, 1.0, 1.0, 1.0)


def test_canonical_form_ignores_input_order():
    a = Partition.from_blocks([[3, 1], [2], [0]], MASSES)
    b = Partition.from_blocks([[0], [1, 3], [2]], MASSES)
    assert a == b
    assert a.blocks == ((0,), (1, 3), (2,))
    assert a.block_mass == (1.0, 2.0, 1.0)


def test_labels_and_code_round_trip():
    p = Partition.from_blocks([[0, 2], [1], [3]], MASSES)
    assert p.labels().tolist() == [0, 1, 0, 3]
    assert code_to_partition(p.code(), MASSES) == p


def test_singletons_code():
    p = Partition.singletons(MASSES)
    assert decode(p.code(), 4).tolist() == [0, 1, 2, 3]


def test_merged_and_coarsening():
    p = Partition.singletons(MASSES)
    q = p.merged(0, 2, MASSES)
    assert q.blocks == ((0, 2), (1,), (3,))
    assert q.is_coarsening_of(p)
    assert not p.is_coarsening_of(q)
    with pytest.raises(InvalidArgumentError):
        p.merged(1, 1, MASSES)


def test_trajectory_state_lookup():
    s0 = Partition.singletons((1.0, 1.0))
    s1 = s0.merged(0, 1, (1.0, 1.0))
    tr = Trajectory((0.5,), (s0, s1))
    assert tr.state_at(0.49) == s0
    assert tr.state_at(0.5) == s1
    assert tr.first_merge == 0.5
    assert Trajectory((), (s0,)).first_merge == float("inf")


def test_sorted_lengths():
    s = SortedLengths([1.0, 3.0, 2.0])
    assert list(s) == [3.0, 2.0, 1.0]
    assert s.top(5).tolist() == [3.0, 2.0, 1.0, 0.0, 0.0]
    assert s.total() == 6.0
    with pytest.raises(InvalidArgumentError):
        SortedLengths([1.0, 0.0])


@settings(max_examples=80, deadline=None)
@given(st.lists(st.integers(0, 5), min_size=1, max_size=6))
def test_code_round_trip_property(raw):
    n = len(raw)
    masses = tuple(float(i + 1) for i in range(n))[::-1]
    p = Partition.from_labels([v % n for v in raw], masses)
    lab = p.labels()
    assert int(encode_labels(lab[None, :])[0]) == p.code()
    assert code_to_partition(p.code(), masses) == p
    assert sum(p.block_mass) == pytest.approx(sum(masses))
    assert all(lab[b[0]] == min(b) for b in p.blocks)
