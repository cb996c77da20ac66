"""
Distribution-free summaries used by the experiment harness.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.stats

from sensing.errors import InvalidInputError

logger = logging.getLogger(__name__)

EXACT_LIMIT = 20


@dataclass(frozen=True)
class MedianCI:
    median: float
    lo: float
    hi: float
    level: float
    degenerate: bool = False


def median_ci(samples, level=0.95):
    """
    Sample median with the order-statistic interval [X_(k), X_(n-k+1)] for
    the largest k whose binomial(n, 1/2) coverage is at least `level`.
    Too few samples give [min, max] flagged degenerate.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    n = len(x)
    if not n:
        raise InvalidInputError("median_ci needs at least one sample")
    if not 0 < level < 1:
        raise InvalidInputError(f"level must be in (0, 1), got {level}")
    median = float(np.median(x))
    best = 0
    for k in range(1, n // 2 + 1):
        coverage = 1 - 2 * scipy.stats.binom.cdf(k - 1, n, 0.5)
        if coverage >= level:
            best = k
        else:
            break
    if not best:
        logger.debug(f"Only {n} samples; median interval is degenerate")
        return MedianCI(median, float(x[0]), float(x[-1]), level, degenerate=True)
    return MedianCI(median, float(x[best - 1]), float(x[n - best]), level)


@dataclass(frozen=True)
class MannWhitneyResult:
    u: float
    p_value: float
    method: str


def _subset_sum_counts(weights, size):
    """counts[s] = number of `size`-subsets of integer weights with sum s."""
    total = int(sum(weights))
    counts = np.zeros((size + 1, total + 1))
    counts[0, 0] = 1.0
    for w in weights:
        w = int(w)
        for m in range(size, 0, -1):
            counts[m, w:] += counts[m - 1, : total + 1 - w]
    return counts[size]


def _exact_p_value(doubled_ranks, n_a, observed):
    counts = _subset_sum_counts(doubled_ranks, n_a)
    total = counts.sum()
    lower = counts[: observed + 1].sum() / total
    upper = counts[observed:].sum() / total
    return min(1.0, 2 * min(lower, upper))


def mann_whitney_u(sample_a, sample_b):
    """
    Two-sided Mann-Whitney U test with midranks.

    Exact (ties included) when both samples have at most 20 values, else
    the normal approximation with tie and continuity corrections.
    """
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    n_a, n_b = len(a), len(b)
    if not n_a or not n_b:
        raise InvalidInputError("both samples must be non-empty")
    ranks = scipy.stats.rankdata(np.concatenate([a, b]))
    rank_sum = float(ranks[:n_a].sum())
    u = rank_sum - n_a * (n_a + 1) / 2

    if n_a <= EXACT_LIMIT and n_b <= EXACT_LIMIT:
        doubled = np.rint(2 * ranks).astype(np.int64)
        observed = int(round(2 * rank_sum))
        return MannWhitneyResult(u, _exact_p_value(doubled, n_a, observed), "exact")

    n = n_a + n_b
    _, tie_counts = np.unique(ranks, return_counts=True)
    tie_term = float(np.sum(tie_counts ** 3 - tie_counts)) / (n * (n - 1))
    variance = n_a * n_b / 12 * ((n + 1) - tie_term)
    if variance <= 0:
        return MannWhitneyResult(u, 1.0, "normal")
    z = (abs(u - n_a * n_b / 2) - 0.5) / math.sqrt(variance)
    p = 1.0 if z <= 0 else min(1.0, 2 * float(scipy.stats.norm.sf(z)))
    return MannWhitneyResult(u, p, "normal")
