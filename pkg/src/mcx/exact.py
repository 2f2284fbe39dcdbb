"""Exact Markov-chain multiplicative coalescent and closed-form oracles.

Blocks are 0-based.  Pairs are unordered pairs of block indices.
"""

from __future__ import annotations

import itertools
import math
from typing import Sequence

import numpy as np
from scipy import integrate

from .config import MassConfig, as_config
from .errors import InvalidArgumentError, UnsupportedSizeError
from .partition import Partition, Trajectory, encode_labels
from .rng import as_generator

BRUTE_FORCE_MAX_N = 6


def _pair_rate_total(m: np.ndarray) -> float:
    # sum_{a<b} m_a m_b via suffix sums, avoids (s1^2 - s2)/2 cancellation
    suffix = np.cumsum(m[::-1])[::-1]
    return float(np.dot(m[:-1], suffix[1:]))


def gillespie(x: MassConfig, horizon: float, seed) -> Trajectory:
    """Event-driven simulation of the multiplicative coalescent.

    Each unordered pair of current blocks merges at rate equal to the product
    of their masses.  Runs until ``horizon`` (may be ``inf``) or until one
    block is left.
    """
    x = as_config(x)
    if not horizon > 0:
        raise InvalidArgumentError("horizon must be > 0")
    rng = as_generator(seed)
    masses = list(x.masses)
    blocks = [[i] for i in range(x.n)]
    mass = np.array(x.masses, dtype=float)
    t = 0.0
    times = []
    states = [Partition.singletons(masses)]
    while mass.size > 1:
        suffix = np.cumsum(mass[::-1])[::-1]
        row = mass[:-1] * suffix[1:]
        cum = np.cumsum(row)
        total = cum[-1]
        t += rng.exponential(1.0 / total)
        if t > horizon:
            break
        # inverse CDF: first block a by row weight, partner b > a by mass
        a = int(np.searchsorted(cum, rng.random() * total, side="right"))
        a = min(a, mass.size - 2)
        tail = np.cumsum(mass[a + 1 :])
        b = a + 1 + min(int(np.searchsorted(tail, rng.random() * tail[-1], side="right")), tail.size - 1)
        blocks[a] = blocks[a] + blocks[b]
        del blocks[b]
        mass[a] += mass[b]
        mass = np.delete(mass, b)
        times.append(t)
        states.append(Partition.from_blocks(blocks, masses))
    return Trajectory(tuple(times), tuple(states))


def gillespie_batch(x: MassConfig, horizon: float, replicas: int, seed) -> np.ndarray:
    """Partition codes at ``horizon`` for many independent chains.

    Vectorised over replicas; practical for small n (the pair-rate matrix is
    materialised per step).
    """
    x = as_config(x)
    rng = as_generator(seed)
    n = x.n
    R = int(replicas)
    labels = np.tile(np.arange(n, dtype=np.int64), (R, 1))
    if n == 1:
        return encode_labels(labels)
    mass = np.tile(x.masses, (R, 1))
    t = np.zeros(R)
    iu, ju = np.triu_indices(n, k=1)
    rows = np.arange(R)
    alive = np.ones(R, dtype=bool)
    for _ in range(n - 1):
        rates = mass[:, iu] * mass[:, ju]
        total = rates.sum(axis=1)
        wait = rng.exponential(size=R)
        with np.errstate(divide="ignore"):
            t = t + np.where(total > 0, wait / np.where(total > 0, total, 1.0), np.inf)
        alive &= t <= horizon
        if not alive.any():
            break
        cum = np.cumsum(rates, axis=1)
        u = rng.random(R) * total
        k = np.minimum((cum <= u[:, None]).sum(axis=1), iu.size - 1)
        # zero-rate pairs (already merged blocks) can never be selected
        a, b = iu[k], ju[k]
        idx = rows[alive]
        a, b = a[alive], b[alive]
        mass[idx, a] += mass[idx, b]
        mass[idx, b] = 0.0
        # blocks are named by their minimal element; a < b so b's members go to a
        moved = labels[idx] == b[:, None]
        labels[idx] = np.where(moved, a[:, None], labels[idx])
    return encode_labels(labels)


def pair_rate_sum(x: MassConfig) -> float:
    """Sum over i<j of x_i x_j."""
    return _pair_rate_total(as_config(x).masses)


def prob_no_merge(x: MassConfig, s: float) -> float:
    """P(S > s) = exp(-s * sum_{i<j} x_i x_j)."""
    if s < 0:
        raise InvalidArgumentError("s must be >= 0")
    return math.exp(-s * pair_rate_sum(x))


def _check_perm(tau: Sequence[int], n: int) -> tuple:
    tau = tuple(int(v) for v in tau)
    if sorted(tau) != list(range(n)):
        raise InvalidArgumentError(f"{tau} is not a permutation of 0..{n - 1}")
    return tau


def prob_pi(x: MassConfig, tau: Sequence[int]) -> float:
    """Probability that the size-biased order equals ``tau``."""
    x = as_config(x)
    tau = _check_perm(tau, x.n)
    w = x.masses[list(tau)]
    rem = np.cumsum(w[::-1])[::-1]
    return float(np.prod(w[:-1] / rem[:-1]))


def prob_first_merge_pair(x: MassConfig, s: float, pair: tuple) -> float:
    """P(T(s) = theta_ab): by time ``s`` exactly one merge, of blocks a and b."""
    x = as_config(x)
    a, b = _check_pair(pair, x.n)
    if s < 0:
        raise InvalidArgumentError("s must be >= 0")
    xa, xb = x.masses[a], x.masses[b]
    others = pair_rate_sum(x) - xa * xb
    return float(-math.expm1(-s * xa * xb) * math.exp(-s * others))


def _check_pair(pair, n):
    a, b = (int(v) for v in pair)
    if a == b:
        raise InvalidArgumentError("pair must name two distinct blocks")
    if not (0 <= a < n and 0 <= b < n):
        raise InvalidArgumentError(f"pair {pair} out of range for n={n}")
    return a, b


def I12(x: MassConfig, tau: Sequence[int], pair: tuple, i: int | None = None) -> float:
    """Conditional weight of the class {tau, tau*} given a single a-b merge.

    ``tau`` must place the pair at adjacent positions ``i, i+1``.  The value
    is symmetric under swapping the two pair members inside ``tau``.
    """
    x = as_config(x)
    tau = _check_perm(tau, x.n)
    a, b = _check_pair(pair, x.n)
    pos = {v: k for k, v in enumerate(tau)}
    if abs(pos[a] - pos[b]) != 1:
        raise InvalidArgumentError(f"{tau} does not place {a} and {b} next to each other")
    first = min(pos[a], pos[b])
    if i is not None and i != first:
        raise InvalidArgumentError(f"pair sits at position {first}, not {i}")
    w = x.masses[list(tau)]
    rem = np.cumsum(w[::-1])[::-1]
    n = x.n
    merged = x.masses[a] + x.masses[b]
    after = rem[first + 2] if first + 2 < n else 0.0
    head = np.prod(w[:first] / rem[:first])
    mid = merged / (merged + after)
    tail = np.prod(w[first + 2 : n - 1] / rem[first + 2 : n - 1])
    return float(head * mid * tail)


def adjacency_classes(n: int, pair: tuple) -> list:
    """Representatives of the classes {tau, tau*} with the pair adjacent.

    Each representative has ``a`` immediately before ``b``.
    """
    a, b = _check_pair(pair, n)
    reps = []
    for tau in itertools.permutations(range(n)):
        p = tau.index(a)
        if p + 1 < n and tau[p + 1] == b:
            reps.append(tau)
    return reps


# -- nested-integral oracle for P(S > s) ------------------------------------


def _cascade_term(w: np.ndarray, s: float) -> float:
    """Evaluate the nested exponential integral for one ordering ``w``.

    Integrates layer by layer from the innermost variable outwards.  After
    each layer the remaining integrand in the enclosing variable ``u`` is
    ``coef * exp(-rate * u)``.
    """
    n = w.size
    coef, rate = 1.0, 0.0
    for k in range(n - 1, -1, -1):
        weight = w[k] * coef
        rate_k = w[k] + rate
        # integral from (u_prev + s*w[k-1]) to infinity of weight*exp(-rate_k*u) du
        coef = weight / rate_k
        if k > 0:
            coef *= math.exp(-rate_k * s * w[k - 1])
        rate = rate_k
    return coef


def _adaptive_term(w: np.ndarray, s: float) -> float:
    """Same integral with scipy quadrature on all but the innermost layer."""
    n = w.size

    def inner(k, u_prev):
        lower = 0.0 if k == 0 else u_prev + s * w[k - 1]
        if k == n - 1:
            return math.exp(-w[k] * lower)
        val, _ = integrate.quad(
            lambda v: w[k] * math.exp(-w[k] * (lower + v)) * inner(k + 1, lower + v),
            0.0,
            math.inf,
            epsabs=1e-11,
            epsrel=1e-10,
            limit=200,
        )
        return val

    if n == 1:
        return 1.0
    return inner(0, 0.0)


def brute_force_S(
    x: MassConfig,
    s: float,
    quadrature: str = "cascade",
    samples: int = 200_000,
    seed=0,
) -> float:
    """P(S > s) summed over all orderings of the exponential marks.

    ``quadrature`` selects the route: ``"cascade"`` reduces every layer of the
    nested integral analytically, ``"adaptive"`` integrates the outer layers
    numerically with the innermost one done in closed form (n <= 4), and
    ``"monte_carlo"`` estimates the event probability from ``samples`` draws.
    """
    x = as_config(x)
    n = x.n
    if n > BRUTE_FORCE_MAX_N:
        raise UnsupportedSizeError(f"brute force limited to n <= {BRUTE_FORCE_MAX_N}, got {n}")
    if s < 0:
        raise InvalidArgumentError("s must be >= 0")
    if quadrature == "monte_carlo":
        rng = as_generator(seed)
        xi = rng.exponential(size=(samples, n)) / x.masses
        order = np.argsort(xi, axis=1)
        srt = np.take_along_axis(xi, order, axis=1)
        w = x.masses[order]
        ok = np.all(np.diff(srt, axis=1) > s * w[:, :-1], axis=1)
        return float(ok.mean())
    if quadrature == "adaptive":
        if n > 4:
            raise UnsupportedSizeError("adaptive quadrature limited to n <= 4")
        term = _adaptive_term
    elif quadrature == "cascade":
        term = _cascade_term
    else:
        raise InvalidArgumentError(f"unknown quadrature route {quadrature!r}")
    total = 0.0
    for tau in itertools.permutations(range(n)):
        total += term(x.masses[list(tau)], s)
    return total
