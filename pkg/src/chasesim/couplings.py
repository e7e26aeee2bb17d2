"""Monotone couplings for the damage X, plus a dominance verifier.

Every coupling here produces a pair (X, X') under shared randomness such
that X' <= X holds in every realization, not merely in distribution:

* the tree passage-time construction and its conversion-rate coupling;
* the half-line jump-chain coupling (first-conversion anchoring plus
  flat-step joint evolution);
* the star race coupling;
* the complete-graph birth/death coupling.

Exponentials that only need to be monotone across rates are coupled by
the shared-uniform inverse transform (-ln(u)/rate); the jump-chain joint
evolution uses the explicit thinning-clock construction with flat steps.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from collections import deque
from dataclasses import dataclass

import numpy as np

from .graphs import Graph
from .process import ProcessParams
from .reductions import AlphaZero, run_jump_chain


class BadOrder(ValueError):
    pass


class NotATree(ValueError):
    pass


class EmptyInput(ValueError):
    pass


def exp_from_uniform(u: float, rate: float) -> float:
    """Inverse-transform exponential; shared u and rate1 >= rate2 give
    value1 <= value2. Rate 0 yields infinity."""
    if rate <= 0:
        return math.inf
    return -math.log(u) / rate


@dataclass(frozen=True)
class CoupledPair:
    x_large: int
    x_small: int
    params_pair: tuple = ()
    shared_seed: object = None


@dataclass(frozen=True)
class DominanceReport:
    n_pairs: int
    n_violations: int
    passed: bool


def verify_dominance(pairs) -> DominanceReport:
    pairs = list(pairs)
    if not pairs:
        raise EmptyInput("no coupled pairs to audit")
    bad = sum(1 for cp in pairs if cp.x_small > cp.x_large)
    return DominanceReport(n_pairs=len(pairs), n_violations=bad, passed=bad == 0)


# ---------------------------------------------------------------- trees

@dataclass(frozen=True)
class TreePassageTimes:
    """Edge and vertex delays, indexed by the child vertex of each edge:
    R_fwd[v] ~ Exp(lam) red parent->v, B_fwd[v] ~ Exp(1) blue parent->v,
    B_back[v] ~ Exp(1) blue v->parent, C[v] ~ Exp(alpha) conversion.
    Root entries of the edge arrays are unused."""

    R_fwd: np.ndarray
    B_fwd: np.ndarray
    B_back: np.ndarray
    C: np.ndarray


@dataclass(frozen=True)
class TreeOutcome:
    ever_red: frozenset
    X: int
    S: np.ndarray  # blue times; formal values for vertices never reached
    levels: tuple
    children_sets: dict


class _TreeStructure:
    __slots__ = ("parent", "order", "children", "depth")

    def __init__(self, g: Graph):
        n = g.n
        if g.n_edges != n - 1:
            raise NotATree(f"{g.n_edges} edges on {n} vertices")
        parent = np.full(n, -1, dtype=np.int64)
        depth = np.full(n, -1, dtype=np.int64)
        order = [g.root]
        depth[g.root] = 0
        queue = deque([g.root])
        while queue:
            x = queue.popleft()
            for y in g.neighbors(x):
                y = int(y)
                if depth[y] < 0 and y != g.root:
                    parent[y] = x
                    depth[y] = depth[x] + 1
                    order.append(y)
                    queue.append(y)
        if len(order) != n:
            raise NotATree("graph is not connected")
        children = [[] for _ in range(n)]
        for v in order[1:]:
            children[parent[v]].append(v)
        self.parent = parent
        self.order = order
        self.children = children
        self.depth = depth


def sample_passage_times(g: Graph, p: ProcessParams, rng) -> TreePassageTimes:
    n = g.n
    c = rng.exponential(size=n) / p.alpha if p.alpha > 0 else np.full(n, math.inf)
    return TreePassageTimes(
        R_fwd=rng.exponential(size=n) / p.lam,
        B_fwd=rng.exponential(size=n),
        B_back=rng.exponential(size=n),
        C=c)


def _tree_outcome(struct: _TreeStructure, times: TreePassageTimes) -> TreeOutcome:
    order, parent, children = struct.order, struct.parent, struct.children
    n = len(order)
    root = order[0]
    r_cum = np.zeros(n)
    for v in order[1:]:
        r_cum[v] = r_cum[parent[v]] + times.R_fwd[v]
    # earliest conversion-seeded blue delay bubbling up each subtree
    t_up = times.C.astype(float).copy()
    for v in reversed(order):
        for c in children[v]:
            cand = times.R_fwd[c] + times.B_back[c] + t_up[c]
            if cand < t_up[v]:
                t_up[v] = cand
    s = np.empty(n)
    s[root] = t_up[root]
    reached = np.zeros(n, dtype=bool)
    reached[root] = True
    for v in order[1:]:
        pa = parent[v]
        s[v] = min(r_cum[v] + t_up[v], s[pa] + times.B_fwd[v])
        reached[v] = reached[pa] and r_cum[v] <= s[pa]
    children_sets = {v: tuple(c for c in children[v] if reached[c]) if reached[v]
                     else () for v in order}
    max_depth = int(struct.depth.max())
    levels = tuple(tuple(v for v in order if struct.depth[v] == d)
                   for d in range(max_depth + 1))
    ever_red = frozenset(int(v) for v in np.flatnonzero(reached))
    return TreeOutcome(ever_red=ever_red, X=len(ever_red), S=s,
                       levels=levels, children_sets=children_sets)


def tree_passage_sample(tree: Graph, p: ProcessParams, rng) -> TreeOutcome:
    """Sample which vertices are ever red via the passage-time formulas:
    no event loop, one pass down for red arrivals and blue times, one pass
    up for conversion-seeded delays. With alpha = 0 every vertex of a
    finite tree is reached."""
    struct = _TreeStructure(tree)
    return _tree_outcome(struct, sample_passage_times(tree, p, rng))


def tree_alpha_coupling_outcomes(tree: Graph, lam: float, alpha: float,
                                 alpha_prime: float, rng) -> tuple:
    """One shared draw evaluated at conversion rates alpha and
    alpha_prime >= alpha; returns (outcome at alpha, outcome at alpha_prime)."""
    if alpha_prime < alpha:
        raise BadOrder(f"alpha_prime {alpha_prime} < alpha {alpha}")
    if alpha < 0:
        raise BadOrder("alpha must be >= 0")
    if lam <= 0:
        raise BadOrder("lam must be > 0")
    struct = _TreeStructure(tree)
    n = tree.n
    r_fwd = rng.exponential(size=n) / lam
    b_fwd = rng.exponential(size=n)
    b_back = rng.exponential(size=n)
    u = rng.random(size=n)
    c = np.array([exp_from_uniform(ui, alpha) for ui in u])
    c_prime = np.array([exp_from_uniform(ui, alpha_prime) for ui in u])
    out = _tree_outcome(struct, TreePassageTimes(r_fwd, b_fwd, b_back, c))
    out_p = _tree_outcome(struct, TreePassageTimes(r_fwd, b_fwd, b_back, c_prime))
    return out, out_p


def tree_alpha_coupling(tree: Graph, lam: float, alpha: float,
                        alpha_prime: float, rng) -> CoupledPair:
    out, out_p = tree_alpha_coupling_outcomes(tree, lam, alpha, alpha_prime, rng)
    return CoupledPair(x_large=out.X, x_small=out_p.X,
                       params_pair=((lam, alpha), (lam, alpha_prime)))


# ------------------------------------------------------- half-line chains

@dataclass(frozen=True)
class JumpCouplingDetail:
    N: int
    M: int
    N_prime: int
    M_prime: int
    heights: tuple  # (y, y') after every joint step, flat steps included
    x_large: int
    x_small: int


class _SiteDraws:
    """Lazily materialized site-indexed uniforms for the half-line, so two
    coupled evaluations consume the same randomness per site regardless of
    how far each one looks ahead."""

    def __init__(self, rng):
        self.rng = rng
        self._edge = []  # edge y -> y+1, index y-1
        self._conv = []  # conversion at site y, index y-1

    def edge_u(self, y: int) -> float:
        while len(self._edge) < y:
            self._edge.append(self.rng.random())
        return self._edge[y - 1]

    def conv_u(self, y: int) -> float:
        while len(self._conv) < y:
            self._conv.append(self.rng.random())
        return self._conv[y - 1]


def _race_first_conversion(lam: float, alpha: float, draws: _SiteDraws):
    """First-conversion outcome (N, M, gamma) plus the red arrival times
    of sites 1..N, all from site-indexed uniforms."""
    arr = [0.0]  # arr[i] = red arrival time of site i+1
    best_t = exp_from_uniform(draws.conv_u(1), alpha)
    best_m = 1
    k = 1
    while True:
        nxt = arr[-1] + exp_from_uniform(draws.edge_u(k), lam)
        if nxt > best_t:
            break
        arr.append(nxt)
        k += 1
        cand = nxt + exp_from_uniform(draws.conv_u(k), alpha)
        if cand < best_t:
            best_t, best_m = cand, k
    n = bisect_right(arr, best_t)
    return n, best_m, best_t, arr


def _primed_state_at(gamma_p: float, lam_p: float, alpha_p: float,
                     draws: _SiteDraws, rng):
    """Rightmost red and rightmost blue of the (lam', alpha') half-line
    process at time gamma_p, evaluated from the passage-time formulas.

    Only sites whose red arrival is <= gamma_p can matter; conversion
    seeds from later sites reach earlier ones strictly after gamma_p, so
    the recursion is truncated there.
    """
    r_cum = [0.0]
    k = 1
    while True:
        nxt = r_cum[-1] + exp_from_uniform(draws.edge_u(k), lam_p)
        if nxt > gamma_p:
            break
        r_cum.append(nxt)
        k += 1
    kk = len(r_cum)  # sites 1..kk have unobstructed red arrival <= gamma_p
    c = [exp_from_uniform(draws.conv_u(y), alpha_p) for y in range(1, kk + 1)]
    b_fwd = rng.exponential(size=kk)   # blue y -> y+1, index y-1
    b_back = rng.exponential(size=kk)  # blue y+1 -> y, index y-1
    t_up = c[:]
    for i in range(kk - 2, -1, -1):
        r_edge = exp_from_uniform(draws.edge_u(i + 1), lam_p)
        t_up[i] = min(t_up[i], r_edge + b_back[i] + t_up[i + 1])
    s = [t_up[0]]
    reached_upto = 1
    for i in range(1, kk):
        if reached_upto == i and r_cum[i] <= s[i - 1]:
            reached_upto = i + 1
        s.append(min(r_cum[i] + t_up[i], s[i - 1] + b_fwd[i - 1]))
    m_p = 0
    n_p = 0
    for i in range(reached_upto):
        if r_cum[i] <= gamma_p:
            n_p = i + 1
        if s[i] <= gamma_p:
            m_p = i + 1
    if m_p == 0:
        raise RuntimeError("no blue present at the anchoring time")
    return n_p, m_p


def _joint_chain_phase(y: int, yp: int, lam: float, lam_p: float,
                       alpha: float, alpha_p: float, rng):
    """Evolve the coupled chains while both are above 0, flat steps
    included; returns (upsteps, upsteps', final y, heights trace)."""
    up = upp = 0
    heights = []
    while yp > 0:
        total = 1.0 + lam + y * alpha + yp * (alpha_p - alpha)
        u = rng.random() * total
        if u < lam_p:
            # shared spread clock: both step up
            y += 1
            yp += 1
            up += 1
            upp += 1
        elif u < lam:
            # spread thinning clock: only the faster chain steps up
            y += 1
            up += 1
        elif u < lam + 1.0:
            # shared chase clock: both step down
            y -= 1
            yp -= 1
        elif u < lam + 1.0 + y * alpha:
            # shared conversion of the i-th red from the front
            i = 1 + int(rng.integers(0, y))
            y = i - 1
            if i <= yp:
                yp = i - 1
        else:
            # conversion thinning clock: only the primed chain converts
            i = 1 + int(rng.integers(0, yp))
            yp = i - 1
        heights.append((y, yp))
    return up, upp, y, heights


def jumpchain_coupling_detail(lam: float, lam_prime: float, alpha: float,
                              alpha_prime: float, rng) -> JumpCouplingDetail:
    """Coupled damage pair on the half-line for lam >= lam' and
    alpha <= alpha'.

    Step 1 anchors both processes on shared site clocks: with M the first
    site to convert in the unprimed process, gamma' is the time M would
    convert under the primed rates, and (N', M') are the rightmost red
    and blue of the primed process at gamma'. Step 2 evolves the two jump
    chains jointly from heights (N - M, N' - M') with flat steps, then
    lets the unprimed chain finish alone.
    """
    if not (lam >= lam_prime > 0):
        raise BadOrder(f"need lam >= lam_prime > 0, got {lam}, {lam_prime}")
    if alpha <= 0:
        raise AlphaZero("first conversion never happens with alpha = 0")
    if alpha > alpha_prime:
        raise BadOrder(f"need alpha <= alpha_prime, got {alpha}, {alpha_prime}")
    draws = _SiteDraws(rng)
    n, m, gamma, _ = _race_first_conversion(lam, alpha, draws)
    r_cum_m = sum(exp_from_uniform(draws.edge_u(y), lam_prime) for y in range(1, m))
    gamma_p = r_cum_m + exp_from_uniform(draws.conv_u(m), alpha_prime)
    n_p, m_p = _primed_state_at(gamma_p, lam_prime, alpha_prime, draws, rng)
    up, upp, y_rest, heights = _joint_chain_phase(
        n - m, n_p - m_p, lam, lam_prime, alpha, alpha_prime, rng)
    if y_rest > 0:
        up += run_jump_chain(y_rest, ProcessParams(lam, alpha), rng).upsteps
    return JumpCouplingDetail(N=n, M=m, N_prime=n_p, M_prime=m_p,
                              heights=tuple(heights),
                              x_large=n + up, x_small=n_p + upp)


def jumpchain_coupling(lam: float, lam_prime: float, alpha: float,
                       alpha_prime: float, rng) -> CoupledPair:
    d = jumpchain_coupling_detail(lam, lam_prime, alpha, alpha_prime, rng)
    return CoupledPair(x_large=d.x_large, x_small=d.x_small,
                       params_pair=((lam, alpha), (lam_prime, alpha_prime)))


# ---------------------------------------------------------------- stars

def _star_stop_index(sigma_inc, t_delay) -> int:
    """I = min{0 <= i <= n : sigma(i+1) > M_i} with sigma(n+1) infinite;
    sigma_inc holds the n increments, t_delay the delays T_0..T_n."""
    n = len(sigma_inc)
    m = t_delay[0]
    sigma = 0.0
    for i in range(1, n + 1):
        sigma += sigma_inc[i - 1]
        if sigma > m:
            return i - 1
        m = min(m, sigma + t_delay[i])
    return n


def star_coupling(n: int, n_prime: int, lam: float, lam_prime: float,
                  alpha: float, alpha_prime: float, rng) -> CoupledPair:
    """Coupled star races on n >= n' leaves with lam >= lam' and
    alpha <= alpha'. Death increments share uniforms (the primed ones are
    never faster), and the root-infection delays are coupled
    component-wise, which forces I' <= I in every realization."""
    if not (n >= n_prime >= 0):
        raise BadOrder(f"need n >= n_prime >= 0, got {n}, {n_prime}")
    if not (lam >= lam_prime > 0):
        raise BadOrder(f"need lam >= lam_prime > 0, got {lam}, {lam_prime}")
    if not (0 <= alpha <= alpha_prime):
        raise BadOrder(f"need 0 <= alpha <= alpha_prime, got {alpha}, {alpha_prime}")
    u_sigma = rng.random(size=n)
    u_conv = rng.random(size=n + 1)
    u_chase = rng.random(size=n + 1)
    sig = [exp_from_uniform(u_sigma[i - 1], (n - i + 1) * lam)
           for i in range(1, n + 1)]
    sig_p = [exp_from_uniform(u_sigma[i - 1], (n_prime - i + 1) * lam_prime)
             for i in range(1, n_prime + 1)]

    def delays(count, a):
        t = [exp_from_uniform(u_conv[0], a)]
        for i in range(1, count + 1):
            t.append(exp_from_uniform(u_conv[i], a) + exp_from_uniform(u_chase[i], 1.0))
        return t

    x = _star_stop_index(sig, delays(n, alpha)) + 1
    x_p = _star_stop_index(sig_p, delays(n_prime, alpha_prime)) + 1
    return CoupledPair(x_large=x, x_small=x_p,
                       params_pair=((n, lam, alpha), (n_prime, lam_prime, alpha_prime)))


# ------------------------------------------------------- complete graphs

def complete_coupling(n: int, n_prime: int, lam: float, lam_prime: float,
                      alpha: float, alpha_prime: float, rng) -> CoupledPair:
    """Coupled complete-graph reductions on n >= n' vertices. Shared
    uniforms speed up the unprimed deaths and the primed births, so the
    primed birth process overtakes no later: X' <= X pointwise."""
    if not (n >= n_prime >= 1):
        raise BadOrder(f"need n >= n_prime >= 1, got {n}, {n_prime}")
    if not (lam >= lam_prime > 0):
        raise BadOrder(f"need lam >= lam_prime > 0, got {lam}, {lam_prime}")
    if not (alpha <= alpha_prime):
        raise BadOrder(f"need alpha <= alpha_prime, got {alpha}, {alpha_prime}")
    if alpha <= 0:
        raise AlphaZero("the birth processes need alpha > 0")

    def sample_x(size, lam_k, alpha_k, u_sigma, u_rho):
        sigma = 0.0
        rho = 0.0
        for i in range(1, size + 1):
            rho += exp_from_uniform(u_rho[i - 1], i - 1 + alpha_k)
            sigma = sigma + exp_from_uniform(u_sigma[i - 1], lam_k * (size - i)) \
                if i < size else math.inf
            if rho < sigma:
                return i
        return size

    u_sigma = rng.random(size=max(n - 1, 1))
    u_rho = rng.random(size=n)
    x = sample_x(n, lam, alpha, u_sigma, u_rho)
    x_p = sample_x(n_prime, lam_prime, alpha_prime, u_sigma, u_rho)
    return CoupledPair(x_large=x, x_small=x_p,
                       params_pair=((n, lam, alpha), (n_prime, lam_prime, alpha_prime)))
