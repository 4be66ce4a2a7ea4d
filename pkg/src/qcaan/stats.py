"""Rank-based group comparison (Kruskal-Wallis omnibus, Dunn's post hoc
pairwise z tests) and Bayesian bootstrap means with highest density intervals.

All tests work on the metric-per-dataset lists produced by the experiment
matrix, one list per augmentation strategy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2, rankdata

ALPHA = 0.05  # significance level used throughout the comparison reports

P_ADJUST_METHODS = ("none", "bonferroni", "holm")


class StatsError(ValueError):
    pass


def _pooled_ranks(groups):
    values = [np.asarray(g, dtype=float).ravel() for g in groups]
    if len(values) < 2:
        raise StatsError("need at least 2 groups")
    if any(v.size == 0 for v in values):
        raise StatsError("groups must be non-empty")
    pooled = np.concatenate(values)
    ranks = rankdata(pooled)
    out, start = [], 0
    for v in values:
        out.append(ranks[start:start + v.size])
        start += v.size
    return values, out, pooled, ranks


def _tie_term(pooled):
    # sum over tie groups of (t^3 - t)
    _, counts = np.unique(pooled, return_counts=True)
    return float(np.sum(counts.astype(float) ** 3 - counts))


@dataclass
class KruskalResult:
    h: float
    p_value: float


def kruskal_wallis(groups) -> KruskalResult:
    """Tie-corrected Kruskal-Wallis H with a chi-square p-value on k-1 df."""
    values, group_ranks, pooled, _ = _pooled_ranks(groups)
    n_total = pooled.size
    if n_total < 3:
        raise StatsError("need at least 3 observations overall")
    h = 12.0 / (n_total * (n_total + 1)) * sum(
        r.size * (r.mean() - (n_total + 1) / 2.0) ** 2 for r in group_ranks)
    correction = 1.0 - _tie_term(pooled) / (n_total ** 3 - n_total)
    if correction <= 0:
        return KruskalResult(0.0, 1.0)  # every observation tied
    h /= correction
    p = float(chi2.sf(h, df=len(values) - 1))
    return KruskalResult(float(h), p)


@dataclass
class DunnResult:
    names: list
    z: np.ndarray  # z[i, j] compares group i against group j (antisymmetric)
    p: np.ndarray  # two-sided, optionally adjusted; symmetric, unit diagonal
    p_adjust: str


def _normal_sf(z):
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def _adjust(p_flat, method):
    m = p_flat.size
    if method == "none" or m == 0:
        return p_flat.copy()
    if method == "bonferroni":
        return np.minimum(1.0, p_flat * m)
    if method == "holm":
        order = np.argsort(p_flat, kind="stable")
        adjusted = np.empty(m)
        running = 0.0
        for rank, idx in enumerate(order):
            running = max(running, (m - rank) * p_flat[idx])
            adjusted[idx] = min(1.0, running)
        return adjusted
    raise StatsError(f"unknown p_adjust {method!r}")


def dunn_test(groups, p_adjust: str = "none", names=None) -> DunnResult:
    """Dunn's pairwise rank comparison after a Kruskal-Wallis setting.

        z_ij = (mean_rank_i - mean_rank_j)
               / sqrt((N(N+1)/12 - T) * (1/n_i + 1/n_j))

    with the tie term T = sum(t^3 - t) / (12(N - 1)).  Two-sided p-values
    come from the standard normal; bonferroni/holm act on the upper triangle.
    """
    if p_adjust not in P_ADJUST_METHODS:
        raise StatsError(f"unknown p_adjust {p_adjust!r}")
    values, group_ranks, pooled, _ = _pooled_ranks(groups)
    k = len(values)
    names = list(names) if names is not None else [f"group{i}" for i in range(k)]
    if len(names) != k:
        raise StatsError("names length mismatch")
    n_total = pooled.size
    tie_term = _tie_term(pooled) / (12.0 * (n_total - 1)) if n_total > 1 else 0.0
    base_var = n_total * (n_total + 1) / 12.0 - tie_term
    mean_ranks = [r.mean() for r in group_ranks]

    z = np.zeros((k, k))
    p = np.ones((k, k))
    pairs = [(i, j) for i in range(k) for j in range(i + 1, k)]
    raw = np.empty(len(pairs))
    for idx, (i, j) in enumerate(pairs):
        variance = base_var * (1.0 / values[i].size + 1.0 / values[j].size)
        if variance <= 0:
            z_ij = 0.0  # all observations tied
        else:
            z_ij = (mean_ranks[i] - mean_ranks[j]) / math.sqrt(variance)
        z[i, j] = z_ij
        z[j, i] = -z_ij
        raw[idx] = 2.0 * _normal_sf(abs(z_ij))
    adjusted = _adjust(raw, p_adjust)
    for idx, (i, j) in enumerate(pairs):
        p[i, j] = p[j, i] = adjusted[idx]
    return DunnResult(names, z, p, p_adjust)


def dirichlet_weights(n: int, rng) -> np.ndarray:
    """One flat-Dirichlet draw over n items via normalized unit exponentials."""
    e = rng.standard_exponential(n)
    return e / e.sum()


def bayesian_bootstrap_mean(values, replications: int = 1000, seed: int = 0) -> np.ndarray:
    """Posterior replicates of the mean under Rubin's Bayesian bootstrap."""
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise StatsError("values must be non-empty")
    rng = np.random.default_rng(seed)
    means = np.empty(replications)
    for r in range(replications):
        means[r] = dirichlet_weights(values.size, rng) @ values
    return means


@dataclass
class HdiInterval:
    lo: float
    hi: float
    mass: float
    replicate_means: np.ndarray

    def width(self) -> float:
        return self.hi - self.lo


def hdi(replicate_means, mass: float = 0.95) -> HdiInterval:
    """Shortest contiguous interval over the sorted replicates containing
    ceil(mass * R) of them; width ties resolve to the lower start index."""
    values = np.sort(np.asarray(replicate_means, dtype=float).ravel())
    if values.size < 2:
        raise StatsError("need at least 2 replicates")
    if not 0.0 < mass < 1.0:
        raise StatsError("mass must be in (0, 1)")
    n_in = int(math.ceil(mass * values.size))
    n_in = max(2, min(n_in, values.size))
    widths = values[n_in - 1:] - values[:values.size - n_in + 1]
    start = int(np.argmin(widths))  # argmin returns the first minimizer
    return HdiInterval(float(values[start]), float(values[start + n_in - 1]),
                       mass, values)
