import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcx import levy
from mcx.config import RegimeParams
from mcx.errors import DegenerateProcessError, InvalidArgumentError
from mcx.rng import stream
from mcx.stats import ks_two_sample


def grid(values, step=1.0):
    return levy.GridPath(step, np.asarray(values, dtype=float))


def test_vc_empty_is_zero():
    v = levy.sample_Vc((), 3.0, 1)
    assert v.drift == 0.0
    assert np.all(v.value(np.linspace(0, 3, 7)) == 0.0)


def test_vc_before_first_jump_is_drift():
    for seed in range(50):
        v = levy.sample_Vc((1.0,), 5.0, seed)
        if v.times.size:
            s = 0.5 * v.times[0]
            assert v.value(s) == pytest.approx(-s)


def test_vc_mean_at_one():
    R = 100_000
    _, jumps, _ = levy.sample_W_batch(RegimeParams(0.0, 0.0, (1.0,)), 1.0, 1.0 / 64, R, 5, parts=True)
    v1 = jumps[:, -1]
    assert abs(v1.mean() + math.exp(-1)) < 3 * v1.std() / math.sqrt(R)


def test_w_without_gauss_equals_vc():
    p = levy.sample_W(RegimeParams(0.0, 0.0, (1.0,)), 4.0, 1 / 128, 3)
    g, v = stream(3, 0), stream(3, 1)
    vc = levy.sample_Vc((1.0,), 4.0, v)
    assert np.allclose(p.values, vc.value(p.times))


@pytest.mark.parametrize("quantity", ["mean", "var"])
def test_w_moments_at_one(quantity):
    R = 100_000
    w = levy.sample_W_batch(RegimeParams(1.0, 0.0, ()), 1.0, 1.0 / 16, R, 8)[:, -1]
    if quantity == "mean":
        assert abs(w.mean() + 0.5) < 3 * w.std() / math.sqrt(R)
    else:
        # sd of the sample variance of a Gaussian is sqrt(2 / R) * var
        assert abs(w.var() - 1.0) < 3 * math.sqrt(2.0 / R)


def test_sample_w_matches_batch_law():
    params = RegimeParams(1.0, 0.5, (0.5,))
    a = np.array([levy.sample_W(params, 1.0, 1 / 32, stream(1, r)).values[-1] for r in range(3000)])
    b = levy.sample_W_batch(params, 1.0, 1 / 32, 3000, 2)[:, -1]
    assert ks_two_sample(a, b)[1] > 0.001


def test_degenerate_regime():
    with pytest.raises(DegenerateProcessError):
        levy.sample_W(RegimeParams(0.0, 0.0, ()), 1.0, 0.1, 0)
    with pytest.raises(DegenerateProcessError):
        levy.default_horizon(RegimeParams(0.0, 1.0, ()))


def test_reflect_example():
    b = levy.reflect(grid([0, 1, 0.5, -0.2, 0.3]))
    assert b.values == pytest.approx([0, 1, 0.5, 0, 0.5])


def test_reflect_non_increasing_path_is_zero():
    assert np.all(levy.reflect(grid([0, -1, -1, -3])).values == 0.0)


def test_excursions_of_zero_path():
    res = levy.excursions(grid(np.zeros(50), 0.1))
    assert len(res.lengths) == 0
    assert not res.truncated


def test_triangular_excursion():
    step = 1e-3
    s = np.arange(0, 4 + step / 2, step)
    tri = np.clip(1 - np.abs(s - 2.0), 0, None)
    res = levy.excursions(grid(tri, step))
    assert len(res.lengths) == 1
    assert abs(res.lengths[0] - 2.0) <= step


def test_open_excursion_is_flagged():
    res = levy.excursions(grid([0, 0, 1, 2, 3], 1.0))
    assert res.truncated
    assert res.open_length == 3.0
    assert len(res.lengths) == 0


def test_min_length_drops_short_runs():
    b = grid([0, 1, 0, 1, 1, 1, 1, 0], 1.0)
    assert list(levy.excursions(b, 0.0).lengths) == [4.0, 1.0]
    assert list(levy.excursions(b, 3.0).lengths) == [4.0]


def test_excursions_reject_negative_path():
    with pytest.raises(InvalidArgumentError):
        levy.excursions(grid([0, -1]))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.0, 2.0), st.sampled_from([(), (1.0,), (1.5, 0.5)]))
def test_reflection_and_zero_set_partition(seed, t, c):
    path = levy.sample_W(RegimeParams(1.0, t, c), 4.0, 4.0 / 512, seed)
    b = levy.reflect(path)
    assert np.all(b.values >= 0)
    res = levy.excursions(b, 0.0)
    covered = res.lengths.total() + res.open_length + res.zero_measure
    assert covered == pytest.approx(b.values.size * b.step)


def test_largest_excursion_self_consistency():
    params = RegimeParams(1.0, 0.0, ())
    a, _ = levy.largest_excursions(params, 1000, 1)
    b, _ = levy.largest_excursions(params, 1000, 2)
    assert ks_two_sample(a[:, 0], b[:, 0])[1] > 0.01


def test_largest_excursions_are_sorted():
    out, trunc = levy.largest_excursions(RegimeParams(1.0, 1.0, (1.0,)), 200, 4)
    assert out.shape == (200, 3)
    assert np.all(np.diff(out, axis=1) <= 0)
    assert 0 <= trunc <= 200


def test_truncation_tail():
    assert levy.truncation_tail((3, 2, 1), 1) == pytest.approx(9.0)
    assert levy.truncation_tail((3, 2, 1), 3) == 0.0
