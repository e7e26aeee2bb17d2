"""Exact alternative samplers of the damage X on three special graphs.

Each construction here is distributionally equal to running the full
process but never touches the event-driven engine, so the two can be
checked against each other as independent oracles:

* half-line: a first-conversion race followed by a jump chain on the
  nonnegative integers that tracks the number of red sites ahead of the
  rightmost blue;
* star: a race between the death process of white leaves and the earliest
  root-infection time bubbling back from converted leaves;
* complete graph: a pure death process (whites) against a birth process
  with immigration (blues), stopped when the births overtake.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .process import ProcessParams


class ZeroHeight(ValueError):
    pass


class AlphaZero(ValueError):
    pass


@dataclass(frozen=True)
class FirstConversion:
    """Outcome of the first-conversion race on the half-line: N is the
    rightmost non-white site at the first conversion time gamma, M the
    site that converted (1-based, M <= N)."""

    N: int
    M: int
    gamma: float


@dataclass(frozen=True)
class JumpChainTrace:
    y0: int
    steps: tuple  # heights after each jump, ending at the first 0
    upsteps: int

    @property
    def kappa(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class StarRace:
    """Materialized star race: sigma[i] is the time the i-th leaf turns
    red (sigma[0] = 0), T[i] the root-infection delay seeded by leaf i
    (T[0] by the root itself), M[i] the running minimum of sigma[k]+T[k],
    I the stopping index, X = I + 1."""

    sigma: np.ndarray
    T: np.ndarray
    M: np.ndarray
    I: int
    X: int


@dataclass(frozen=True)
class BirthDeathTrace:
    sigma: np.ndarray  # white death times, sigma[0] = 0
    rho: np.ndarray    # blue birth times actually drawn, rho[0] = 0
    rho_star: float
    tau: float
    W_tau: int
    X: int


def jump_probabilities(k: int, p: ProcessParams) -> dict:
    """Transition law of the red-front jump chain at height k >= 1.

    Up to k+1 with probability lam/(1+lam+alpha*k); down to k-1 with
    (1+alpha)/(1+lam+alpha*k); and for each j in {0..k-2} a conversion
    drop straight to j with probability alpha/(1+lam+alpha*k).
    """
    if k < 1:
        raise ZeroHeight(f"height must be >= 1, got {k}")
    denom = 1.0 + p.lam + p.alpha * k
    probs = {k + 1: p.lam / denom, k - 1: (1.0 + p.alpha) / denom}
    for j in range(k - 1):
        probs[j] = p.alpha / denom
    return probs


def run_jump_chain(y0: int, p: ProcessParams, rng) -> JumpChainTrace:
    """Run the jump chain from height y0 until it first hits 0."""
    if y0 < 0:
        raise ValueError(f"initial height must be >= 0, got {y0}")
    k = y0
    steps = []
    upsteps = 0
    while k > 0:
        denom = 1.0 + p.lam + p.alpha * k
        u = rng.random() * denom
        if u < p.lam:
            k += 1
            upsteps += 1
        elif u < p.lam + 1.0 + p.alpha:
            k -= 1
        else:
            # conversion of the red at distance k - j from the front
            k = int(rng.integers(0, k - 1))
        steps.append(k)
    return JumpChainTrace(y0=y0, steps=tuple(steps), upsteps=upsteps)


def sample_first_conversion(p: ProcessParams, rng) -> FirstConversion:
    """Race the red front (rate lam) against the conversion clocks of the
    red sites behind it (rate alpha each) on the half-line, starting from
    a single red at site 1; stop at the first conversion."""
    if p.alpha <= 0:
        raise AlphaZero("no conversion ever happens with alpha = 0")
    front = 1
    gamma = 0.0
    while True:
        total = p.lam + p.alpha * front
        gamma += rng.exponential() / total
        if rng.random() * total < p.lam:
            front += 1
        else:
            m = 1 + int(rng.integers(0, front))
            return FirstConversion(N=front, M=m, gamma=gamma)


def sample_X_via_jump_chain(p: ProcessParams, rng) -> int:
    """Damage on the half-line: X = N + (upsteps of the jump chain started
    at N - M), with (N, M) from the first-conversion race."""
    fc = sample_first_conversion(p, rng)
    trace = run_jump_chain(fc.N - fc.M, p, rng)
    return fc.N + trace.upsteps


def star_race(n: int, p: ProcessParams, rng) -> StarRace:
    """Run the star race on n leaves.

    sigma(i) - sigma(i-1) ~ Exp((n-i+1)*lam) is the i-th leaf infection;
    T_0 ~ Exp(alpha) and T_i ~ Exp(alpha) + Exp(1) for i >= 1 are the
    delays until the root turns blue seeded by each infected leaf;
    I = min{0 <= i <= n : sigma(i+1) > M_i} with sigma(n+1) = infinity and
    M_i the running minimum of sigma(k) + T_k. The damage is X = I + 1.
    """
    if n < 0:
        raise ValueError(f"leaf count must be >= 0, got {n}")
    sigma = np.zeros(n + 1)
    t = 0.0
    for i in range(1, n + 1):
        t += rng.exponential() / ((n - i + 1) * p.lam)
        sigma[i] = t
    T = np.empty(n + 1)
    for i in range(n + 1):
        conv = rng.exponential() / p.alpha if p.alpha > 0 else math.inf
        T[i] = conv if i == 0 else conv + rng.exponential()
    M = np.minimum.accumulate(sigma + T)
    I = n
    for i in range(n):
        if sigma[i + 1] > M[i]:
            I = i
            break
    return StarRace(sigma=sigma, T=T, M=M, I=I, X=I + 1)


def star_sample_X(n: int, p: ProcessParams, rng) -> int:
    return star_race(n, p, rng).X


def complete_race(n: int, p: ProcessParams, rng) -> BirthDeathTrace:
    """Run the complete-graph reduction on n vertices.

    Whites die at jump times sigma with sigma(i+1) - sigma(i) ~
    Exp(lam*(n-1-i)); blues are born at jump times rho with
    rho(i+1) - rho(i) ~ Exp(i+alpha). With rho* the first birth time
    rho(i) that beats sigma(i) (sigma extended by infinity past n-1) and
    tau = min(sigma(n-1), rho*), the damage is X = n - W_tau where W_tau
    counts whites still alive at tau.
    """
    if n < 1:
        raise ValueError(f"vertex count must be >= 1, got {n}")
    if p.alpha <= 0:
        raise AlphaZero("the birth process needs alpha > 0")
    sigma = np.zeros(n)
    t = 0.0
    for i in range(1, n):
        t += rng.exponential() / (p.lam * (n - i))
        sigma[i] = t
    rho = [0.0]
    rho_star = math.inf
    for i in range(1, n + 1):
        rho.append(rho[-1] + rng.exponential() / (i - 1 + p.alpha))
        if rho[i] < (sigma[i] if i < n else math.inf):
            rho_star = rho[i]
            break
    tau = min(sigma[n - 1], rho_star)
    deaths = int(np.count_nonzero(sigma[1:] <= tau))
    w_tau = n - 1 - deaths
    return BirthDeathTrace(sigma=sigma, rho=np.array(rho), rho_star=rho_star,
                           tau=tau, W_tau=w_tau, X=n - w_tau)


def complete_sample_X(n: int, p: ProcessParams, rng) -> int:
    return complete_race(n, p, rng).X
