"""Closed-form phase-transition bounds and the good-site percolation
simulator used to certify the escape regime.

`lambda_lower` and `lambda_upper` bracket the critical spread rate on a
graph of maximum degree d; the remaining formulas are the ingredients of
those bounds: the k-step survival probability of red along a path, the
geometric-series bound on expected damage, and the per-site lower bound
on the probability that a vertex is "good" (red spreads to all neighbors
before blue can interfere). The simulator draws the clock inequalities
directly and extracts the root's good-cluster.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import Graph
from .process import ProcessParams


class BadDegree(ValueError):
    pass


class BadInputs(ValueError):
    pass


class _Infinite:
    """Tagged divergence marker; never participates in arithmetic."""

    __slots__ = ()

    def __repr__(self):
        return "INFINITE"


INFINITE = _Infinite()


def is_infinite(x) -> bool:
    return x is INFINITE


def _check_degree(d) -> int:
    if int(d) != d or d < 3:
        raise BadDegree(f"maximum degree must be an integer >= 3, got {d}")
    return int(d)


def lambda_lower(d: int, alpha: float) -> float:
    """Below alpha/(d-2) the expected damage is finite, so red dies out."""
    d = _check_degree(d)
    if alpha <= 0:
        raise BadInputs(f"alpha must be positive, got {alpha}")
    return alpha / (d - 2)


def lambda_upper(d: int, alpha: float, p_c: float) -> float:
    """Above (d+alpha)/(1-p_c^(1/d)) the good sites percolate, so red can
    escape; requires the site-percolation threshold p_c of the graph."""
    d = _check_degree(d)
    if alpha <= 0:
        raise BadInputs(f"alpha must be positive, got {alpha}")
    if not 0 < p_c < 1:
        raise BadInputs(f"p_c must lie in (0, 1), got {p_c}")
    return (d + alpha) / (1.0 - p_c ** (1.0 / d))


def path_survival_bound(lam: float, alpha: float, k: int) -> float:
    """P(red traverses k consecutive edges before converting) <=
    (lam/(lam+alpha))^k: each hop must win an Exp(lam) vs Exp(alpha) race."""
    if k < 0 or int(k) != k:
        raise BadInputs(f"k must be a nonnegative integer, got {k}")
    return (lam / (lam + alpha)) ** k


def expected_damage_bound(lam: float, alpha: float, d: int):
    """Geometric-series bound on E[X] via counting self-avoiding paths of
    each length: 1 + (d lam/(lam+alpha)) * sum_k ((d-1) lam/(lam+alpha))^k.
    Returns INFINITE when the series ratio reaches 1."""
    d = _check_degree(d)
    ratio = (d - 1) * lam / (lam + alpha)
    if ratio >= 1.0:
        return INFINITE
    return 1.0 + (d * lam / (lam + alpha)) / (1.0 - ratio)


def good_site_prob_lower(lam: float, alpha: float, d: int) -> float:
    """P(site is good) >= (lam/(lam+d+alpha))^d: each of <= d outgoing
    spreads beats the combined Exp(d+alpha) interference clock."""
    if d < 1 or int(d) != d:
        raise BadInputs(f"d must be a positive integer, got {d}")
    return (lam / (lam + d + alpha)) ** d


@dataclass(frozen=True)
class GoodSiteSample:
    good_mask: np.ndarray
    root_cluster_size: int


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        p = self.parent
        while p[a] != a:
            p[a] = p[p[a]]
            a = p[a]
        return a

    def union(self, a: int, b: int):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb


def good_site_percolation_sim(g: Graph, p: ProcessParams, rng) -> GoodSiteSample:
    """One draw of the good-site field: vertex x is good when its slowest
    outgoing red spread still beats every incoming blue spread and its own
    conversion clock. Isolated vertices are vacuously good (the empty max
    is 0, the empty min infinite). Returns the mask and the size of the
    root's connected good-cluster."""
    n = g.n
    indptr, indices = g.indptr, g.indices
    _, rev = g.directed_arrays()
    m = len(indices)
    r_out = rng.exponential(size=m) / p.lam
    b_dir = rng.exponential(size=m)
    c = rng.exponential(size=n) / p.alpha if p.alpha > 0 else np.full(n, np.inf)
    b_in = b_dir[rev]  # aligned with out-slots: entry e is the edge target->source
    good = np.empty(n, dtype=bool)
    starts = indptr[:-1]
    nonempty = indptr[1:] > starts
    if m:
        max_r = np.maximum.reduceat(r_out, np.minimum(starts, m - 1))
        min_b = np.minimum.reduceat(b_in, np.minimum(starts, m - 1))
        good = (max_r < np.minimum(min_b, c)) & nonempty
    good[~nonempty] = True  # vacuously good
    if not good[g.root]:
        return GoodSiteSample(good_mask=good, root_cluster_size=0)
    uf = _UnionFind(n)
    for u in range(n):
        if not good[u]:
            continue
        for e in range(indptr[u], indptr[u + 1]):
            v = int(indices[e])
            if v > u and good[v]:
                uf.union(u, v)
    root_rep = uf.find(g.root)
    size = sum(1 for v in range(n) if good[v] and uf.find(v) == root_rep)
    return GoodSiteSample(good_mask=good, root_cluster_size=size)
