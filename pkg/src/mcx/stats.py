"""Two-sample comparisons and the desk-scale convergence study."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special
from scipy import stats as sps

from . import bfw, levy
from .config import RegimeParams, make_standard_config, sigma
from .errors import InvalidArgumentError, UnsupportedSizeError
from .partition import Partition, SortedLengths
from .rng import stream
from .workers import map_ranges

TV_MAX_N = 6
TOP_K = 3
SINGLE_ALPHA = 0.01
LIMIT_FACTOR = 4


@dataclass(frozen=True)
class SampleBatch:
    values: tuple
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        meta = dict(self.meta)
        meta.setdefault("replica_count", len(self.values))
        meta.setdefault("truncation_count", 0)
        if meta["replica_count"] != len(self.values):
            raise InvalidArgumentError("replica_count must equal the number of values")
        if meta["truncation_count"] > meta["replica_count"]:
            raise InvalidArgumentError("truncation_count exceeds replica_count")
        object.__setattr__(self, "meta", meta)


@dataclass(frozen=True)
class ComparisonReport:
    ks_statistic: float
    ks_pvalue: float
    wasserstein: float
    tv_estimate: float | None = None
    alpha: float = SINGLE_ALPHA

    @property
    def verdict(self) -> str:
        return "pass" if self.ks_pvalue > self.alpha else "fail"

    def as_dict(self) -> dict:
        return {
            "ks_statistic": self.ks_statistic,
            "ks_pvalue": self.ks_pvalue,
            "wasserstein": self.wasserstein,
            "tv_estimate": self.tv_estimate,
            "verdict": self.verdict,
        }


def ks_two_sample(a: Sequence[float], b: Sequence[float]):
    """Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.

    The statistic is ``sup |F_a - F_b|`` over the pooled sample; the p-value
    is the Kolmogorov limit law at ``sqrt(n m / (n + m)) * D``.
    """
    a = np.sort(np.asarray(a, dtype=float).reshape(-1))
    b = np.sort(np.asarray(b, dtype=float).reshape(-1))
    if a.size == 0 or b.size == 0:
        raise InvalidArgumentError("both samples must be non-empty")
    pooled = np.concatenate([a, b])
    fa = np.searchsorted(a, pooled, side="right") / a.size
    fb = np.searchsorted(b, pooled, side="right") / b.size
    d = float(np.max(np.abs(fa - fb)))
    en = a.size * b.size / (a.size + b.size)
    p = float(special.kolmogorov(math.sqrt(en) * d)) if d > 0 else 1.0
    return d, min(max(p, 0.0), 1.0)


def compare(a, b, alpha: float = SINGLE_ALPHA) -> ComparisonReport:
    d, p = ks_two_sample(a, b)
    w = float(sps.wasserstein_distance(np.ravel(a), np.ravel(b)))
    return ComparisonReport(d, p, w, alpha=alpha)


def sorted_l2_distance(a, b) -> float:
    """l2 distance between two decreasing vectors, shorter one zero-padded."""
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    k = max(a.size, b.size)
    pa = np.zeros(k)
    pb = np.zeros(k)
    pa[: a.size] = a
    pb[: b.size] = b
    return float(np.sqrt(np.sum((pa - pb) ** 2)))


def _codes(batch, n):
    if len(batch) and isinstance(batch[0], Partition):
        sizes = {p.n for p in batch}
        if len(sizes) != 1:
            raise InvalidArgumentError("partitions must share one index set")
        return [p.key for p in batch], sizes.pop()
    return [int(c) for c in batch], n


def tv_partition_estimate(a, b, n: int | None = None) -> float:
    """Half the l1 distance between the empirical partition frequencies.

    Accepts sequences of :class:`Partition` or of integer partition codes
    (then ``n`` must be given).
    """
    ka, na = _codes(a, n)
    kb, nb = _codes(b, n)
    size = na if na is not None else nb
    if size is None:
        raise InvalidArgumentError("n is required for coded partitions")
    if na is not None and nb is not None and na != nb:
        raise InvalidArgumentError("partitions must share one index set")
    if size > TV_MAX_N:
        raise UnsupportedSizeError(f"TV over set partitions limited to n <= {TV_MAX_N}")
    if not ka or not kb:
        raise InvalidArgumentError("both batches must be non-empty")
    ca, cb = Counter(ka), Counter(kb)
    return 0.5 * sum(abs(ca[k] / len(ka) - cb[k] / len(kb)) for k in set(ca) | set(cb))


def binomial_check(count: int, trials: int, p: float, k: float = 3.0):
    """Whether ``count / trials`` lies within ``k`` binomial sigmas of ``p``.

    Returns ``(ok, z)``.
    """
    sd = math.sqrt(p * (1 - p) / trials)
    freq = count / trials
    if sd == 0:
        return freq == p, 0.0
    z = (freq - p) / sd
    return abs(z) <= k, z


def chi2_goodness(counts, probs):
    """Pearson chi-square of observed counts against cell probabilities."""
    counts = np.asarray(counts, dtype=float)
    probs = np.asarray(probs, dtype=float)
    expected = probs / probs.sum() * counts.sum()
    res = sps.chisquare(counts, expected)
    return float(res.statistic), float(res.pvalue)


# -- convergence study ------------------------------------------------------


def _tops_range(x, q, n, seed, top, lo, hi):
    s1 = sigma(x, 1)
    tops = np.zeros((hi - lo, top))
    bad = 0
    for r in range(lo, hi):
        comp = bfw.components(bfw.build_bfw(x, q, stream(seed, 2, n, r), surplus=False))
        if not math.isclose(comp.total(), s1, rel_tol=1e-9):
            bad += 1
        tops[r - lo] = comp.top(top)
    return tops, bad


def bfw_top_components(
    params: RegimeParams, n: int, replicas: int, seed: int, top: int = TOP_K, l=None, jobs: int = 1
):
    """Top component masses of the time-q_n graph over replicas.

    Returns ``(tops[replicas, top], config, q, mass_violations)``.  Replica
    ``r`` at size ``n`` uses stream ``(seed, 2, n, r)``.
    """
    x = make_standard_config(n, params, l)
    q = 1.0 / sigma(x, 2) + params.t
    if not q > 0:
        raise InvalidArgumentError(f"q = 1/sigma_2 + t = {q} is not positive")
    parts = map_ranges(_tops_range, replicas, jobs, x, q, n, seed, top)
    tops = np.concatenate([p[0] for p in parts])
    return tops, x, q, sum(p[1] for p in parts)


def convergence_study(
    params: RegimeParams,
    n_list,
    replicas: int,
    seed: int,
    limit_replicas: int | None = None,
    horizon: float | None = None,
    step: float | None = None,
    top: int = TOP_K,
    jobs: int = 1,
) -> list:
    """Compare component masses at q_n = 1/sigma_2 + t with limit excursions.

    For each n the largest component mass of the breadth-first-walk graph is
    compared (two-sample KS) with the largest excursion of the simulated
    reflected limit walk.  Both are in mass units.  A row is emitted per n.
    The limit batch is shared across n and defaults to ``LIMIT_FACTOR``
    times ``replicas``, since limit paths are cheap and a larger reference
    batch lowers the KS noise floor.
    """
    limit_replicas = LIMIT_FACTOR * replicas if limit_replicas is None else limit_replicas
    lim, trunc = levy.largest_excursions(params, limit_replicas, stream(seed, 3).integers(2**62), horizon, step, top)
    rows = []
    for n in n_list:
        tops, x, q, bad = bfw_top_components(params, int(n), replicas, seed, top, jobs=jobs)
        mean_bfw = float(tops[:, 0].mean())
        mean_lim = float(lim[:, 0].mean())
        # unit guard: a wrong normalisation shows up as a large ratio of means
        guard = 0.5 <= mean_bfw / mean_lim <= 2.0 if mean_lim > 0 else False
        rep = compare(tops[:, 0], lim[:, 0])
        rows.append(
            {
                "n": int(n),
                "blocks": x.n,
                "sigma2": sigma(x, 2),
                "q": q,
                "replicas": replicas,
                "ks_statistic": rep.ks_statistic,
                "ks_pvalue": rep.ks_pvalue,
                "wasserstein": rep.wasserstein,
                "mean_largest": mean_bfw,
                "mean_limit_largest": mean_lim,
                "mean_top": tops.mean(axis=0).tolist(),
                "mean_limit_top": lim.mean(axis=0).tolist(),
                "top_l2": sorted_l2_distance(tops.mean(axis=0), lim.mean(axis=0)),
                "mass_violations": bad,
                "limit_truncations": trunc,
                "unit_guard": bool(guard),
            }
        )
    return rows


def stability_study(params: RegimeParams, n_pair, replicas: int, seed: int, top: int = 2, jobs: int = 1):
    """KS comparison of leading components between two sizes.

    Masses are expressed in units of ``n^(-1/3)``, the scale of the
    macroscopic blocks, so that the law is comparable across n.
    """
    out = []
    for n in n_pair:
        tops, *_ = bfw_top_components(params, int(n), replicas, seed, top, jobs=jobs)
        # rounding merges atoms that differ only by floating-point error
        out.append(np.round(tops * n ** (1.0 / 3.0), 9))
    d, p = ks_two_sample(out[0][:, 0], out[1][:, 0])
    return {"n": list(n_pair), "ks_statistic": d, "ks_pvalue": p, "tops": out}


def as_sorted_lengths(values) -> SortedLengths:
    return SortedLengths(np.asarray(values, dtype=float)[np.asarray(values) > 0])
