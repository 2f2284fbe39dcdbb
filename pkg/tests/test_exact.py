import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcx import exact
from mcx.config import MassConfig
from mcx.errors import InvalidArgumentError, UnsupportedSizeError
from mcx.partition import Partition
from mcx.rng import stream
from conftest import binom_ok


# -- closed forms -----------------------------------------------------------


@pytest.mark.parametrize(
    "masses, s, expected",
    [
        ((1, 1, 1), 0.3, math.exp(-0.9)),
        ((2, 1), 0.5, math.exp(-1.0)),
        ((3, 2, 1), 0.0, 1.0),
    ],
)
def test_prob_no_merge(masses, s, expected):
    assert exact.prob_no_merge(MassConfig(masses), s) == pytest.approx(expected, rel=1e-12)


def test_prob_no_merge_value_to_five_digits():
    assert round(exact.prob_no_merge(MassConfig((1, 1, 1)), 0.3), 5) == 0.40657


def test_prob_pi_examples():
    assert exact.prob_pi(MassConfig((2, 1)), (0, 1)) == pytest.approx(2 / 3)
    for tau in itertools.permutations(range(3)):
        assert exact.prob_pi(MassConfig((1, 1, 1)), tau) == pytest.approx(1 / 6)
    total = sum(exact.prob_pi(MassConfig((3, 2, 1)), t) for t in itertools.permutations(range(3)))
    assert total == pytest.approx(1.0, abs=1e-14)


def test_prob_pi_rejects_non_permutation():
    with pytest.raises(InvalidArgumentError):
        exact.prob_pi(MassConfig((2, 1)), (0, 0))


def test_prob_first_merge_pair_example():
    val = exact.prob_first_merge_pair(MassConfig((1, 1, 1)), 0.3, (0, 1))
    assert val == pytest.approx((1 - math.exp(-0.3)) * math.exp(-0.6), rel=1e-12)
    assert val == pytest.approx(0.14223, abs=2e-5)
    assert exact.prob_first_merge_pair(MassConfig((1, 1, 1)), 0.0, (0, 1)) == 0.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.05, 3.0), min_size=2, max_size=6), st.floats(0.0, 2.0))
def test_single_mergers_and_no_merge_are_disjoint(values, s):
    x = MassConfig.from_values(values)
    total = exact.prob_no_merge(x, s)
    total += sum(exact.prob_first_merge_pair(x, s, p) for p in itertools.combinations(range(x.n), 2))
    assert total <= 1.0 + 1e-12


def test_I12_examples():
    x = MassConfig((1, 1, 1))
    assert exact.I12(x, (0, 1, 2), (0, 1)) == pytest.approx(2 / 3)
    assert exact.I12(x, (1, 0, 2), (0, 1)) == pytest.approx(2 / 3)
    assert exact.I12(x, (2, 0, 1), (0, 1)) == pytest.approx(1 / 3)


@pytest.mark.parametrize("pair", [(0, 1), (0, 2), (1, 2)])
def test_I12_classes_sum_to_one(pair):
    x = MassConfig((3, 2, 1))
    reps = exact.adjacency_classes(3, pair)
    assert len(reps) == 2
    assert sum(exact.I12(x, t, pair) for t in reps) == pytest.approx(1.0, abs=1e-14)


def test_I12_swap_symmetry_and_errors():
    x = MassConfig((4, 3, 2, 1))
    for tau in exact.adjacency_classes(4, (1, 3)):
        swapped = tuple({1: 3, 3: 1}.get(v, v) for v in tau)
        assert exact.I12(x, tau, (1, 3)) == pytest.approx(exact.I12(x, swapped, (1, 3)))
    with pytest.raises(InvalidArgumentError):
        exact.I12(x, (0, 1, 2, 3), (0, 2))
    with pytest.raises(InvalidArgumentError):
        exact.I12(x, (0, 1, 2, 3), (0, 1), i=2)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.1, 3.0), min_size=2, max_size=5))
def test_I12_sum_property(values):
    x = MassConfig.from_values(values)
    assert sum(exact.I12(x, t, (0, 1)) for t in exact.adjacency_classes(x.n, (0, 1))) == pytest.approx(1.0)


# -- brute force oracle -----------------------------------------------------


@pytest.mark.parametrize("route", ["cascade", "adaptive"])
def test_brute_force_matches_closed_form(route):
    x = MassConfig((1, 1, 1))
    assert abs(exact.brute_force_S(x, 0.3, route) - exact.prob_no_merge(x, 0.3)) < 1e-6


@pytest.mark.parametrize("s", [0.0, 0.2, 1.0, 3.0])
def test_brute_force_two_blocks_by_hand(s):
    assert exact.brute_force_S(MassConfig((2, 1)), s) == pytest.approx(math.exp(-2 * s), abs=1e-8)
    assert exact.brute_force_S(MassConfig((2, 1)), s, "adaptive") == pytest.approx(math.exp(-2 * s), abs=1e-8)


def test_brute_force_at_zero():
    assert exact.brute_force_S(MassConfig((3, 2, 1, 0.5)), 0.0) == pytest.approx(1.0, abs=1e-9)


def test_brute_force_monte_carlo_route():
    x = MassConfig((1, 1, 1))
    est = exact.brute_force_S(x, 0.3, "monte_carlo", samples=100_000, seed=3)
    assert binom_ok(est * 100_000, 100_000, exact.prob_no_merge(x, 0.3), 4)


def test_brute_force_limits():
    with pytest.raises(UnsupportedSizeError):
        exact.brute_force_S(MassConfig((1,) * 7), 0.1)
    with pytest.raises(UnsupportedSizeError):
        exact.brute_force_S(MassConfig((1,) * 5), 0.1, "adaptive")
    with pytest.raises(InvalidArgumentError):
        exact.brute_force_S(MassConfig((1, 1)), 0.1, "simpson")


# -- simulation -------------------------------------------------------------


def test_gillespie_single_block_has_no_merges():
    tr = exact.gillespie(MassConfig((1.0,)), 10.0, 1)
    assert tr.times == ()
    assert tr.states[0].blocks == ((0,),)


def test_gillespie_trajectory_is_coarsening_chain():
    x = MassConfig((3, 2, 1, 1, 0.5))
    tr = exact.gillespie(x, math.inf, 5)
    assert len(tr.times) == x.n - 1
    assert all(b > a for a, b in zip(tr.times, tr.times[1:]))
    for prev, nxt in zip(tr.states, tr.states[1:]):
        assert nxt.is_coarsening_of(prev)
        assert len(nxt.blocks) == len(prev.blocks) - 1
    assert tr.states[-1].block_mass == (x.masses.sum(),)


def test_gillespie_two_blocks_merge_probability():
    x = MassConfig((1, 1))
    R = 20_000
    merged = sum(exact.gillespie(x, 1.0, stream(11, r)).times != () for r in range(R))
    assert binom_ok(merged, R, 1 - math.exp(-1))


def test_gillespie_batch_no_merge_law():
    x = MassConfig((1, 1, 1))
    R = 100_000
    codes = exact.gillespie_batch(x, 0.3, R, 2)
    singles = Partition.singletons(x.masses).code()
    assert binom_ok(int(np.sum(codes == singles)), R, math.exp(-0.9))


def test_gillespie_batch_agrees_with_looped_version():
    x = MassConfig((1.5, 1.0, 0.7))
    R = 20_000
    loop = np.array([exact.gillespie(x, 0.4, stream(4, r)).state_at(0.4).code() for r in range(R)])
    batch = exact.gillespie_batch(x, 0.4, R, 9)
    for code in np.unique(np.concatenate([loop, batch])):
        p = np.mean(batch == code)
        assert abs(np.mean(loop == code) - p) < 4 * math.sqrt(2 * p * (1 - p) / R) + 1e-3


def test_gillespie_rejects_bad_horizon():
    with pytest.raises(InvalidArgumentError):
        exact.gillespie(MassConfig((1, 1)), 0.0, 1)
