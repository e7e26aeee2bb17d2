"""Exact distributional reductions: jump chain, star race, complete-graph race."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.random import Generator, Philox

from chasesim.graphs import build_complete, build_path, build_star
from chasesim.process import run_to_fixation
from chasesim.harness import distribution_compare
from chasesim.reductions import (
    AlphaZero,
    ProcessParams,
    ZeroHeight,
    complete_race,
    complete_sample_X,
    jump_probabilities,
    run_jump_chain,
    sample_X_via_jump_chain,
    sample_first_conversion,
    star_race,
    star_sample_X,
)

P11 = ProcessParams(1.0, 1.0)


def rng_of(seed: int) -> Generator:
    return Generator(Philox(seed))


def test_jump_probabilities_unit_height():
    probs = jump_probabilities(1, P11)
    assert probs == {2: pytest.approx(1 / 3), 0: pytest.approx(2 / 3)}


def test_jump_probabilities_with_conversion_drops():
    probs = jump_probabilities(3, ProcessParams(2.0, 0.5))
    denom = 1.0 + 2.0 + 0.5 * 3
    assert probs[4] == pytest.approx(2.0 / denom)
    assert probs[2] == pytest.approx(1.5 / denom)
    assert probs[0] == pytest.approx(0.5 / denom)
    assert probs[1] == pytest.approx(0.5 / denom)
    assert set(probs) == {0, 1, 2, 4}


def test_jump_probabilities_rejects_height_zero():
    with pytest.raises(ZeroHeight):
        jump_probabilities(0, P11)


@given(st.integers(min_value=1, max_value=40),
       st.floats(min_value=0.01, max_value=50, allow_nan=False),
       st.floats(min_value=0.001, max_value=50, allow_nan=False))
@settings(max_examples=200)
def test_jump_probabilities_sum_to_one(k, lam, alpha):
    probs = jump_probabilities(k, ProcessParams(lam, alpha))
    assert math.isclose(sum(probs.values()), 1.0, rel_tol=1e-12)
    assert all(q > 0 for q in probs.values())


def test_jump_chain_trace_structure():
    trace = run_jump_chain(3, P11, rng_of(2))
    heights = (3,) + trace.steps
    assert trace.y0 == 3
    assert heights[-1] == 0
    ups = 0
    for a, b in zip(heights, heights[1:]):
        assert a >= 1  # chain only moves from positive heights
        assert b == a + 1 or b == a - 1 or (0 <= b <= a - 2)
        ups += b == a + 1
    assert ups == trace.upsteps


def test_jump_chain_height_zero_is_absorbing():
    trace = run_jump_chain(0, P11, rng_of(3))
    assert trace.steps == ()
    assert trace.upsteps == 0
    with pytest.raises(ValueError):
        run_jump_chain(-1, P11, rng_of(3))


def test_jump_sampler_rejects_alpha_zero():
    with pytest.raises(AlphaZero):
        sample_X_via_jump_chain(ProcessParams(1.0, 0.0), rng_of(4))


def test_first_conversion_invariants():
    rng = rng_of(5)
    for _ in range(300):
        fc = sample_first_conversion(ProcessParams(1.7, 0.4), rng)
        assert 1 <= fc.M <= fc.N
        assert fc.gamma > 0


def test_sample_x_positive():
    rng = rng_of(6)
    xs = [sample_X_via_jump_chain(P11, rng) for _ in range(500)]
    assert min(xs) >= 1
    assert max(xs) > 1  # not degenerate


def test_jump_chain_matches_engine_on_path():
    # half-line law, clipped at the path length; the clip and the engine's
    # truncation coincide realization-wise
    g = build_path(64)
    n = 10_000
    rng = rng_of(81)
    reduced = [min(sample_X_via_jump_chain(P11, rng), 64) for _ in range(n)]
    rng = rng_of(82)
    direct = [run_to_fixation(g, P11, rng=rng).damage for _ in range(n)]
    report = distribution_compare(reduced, direct)
    assert report.passed, f"chi2 p={report.p_value}"


def test_star_race_structure():
    race = star_race(5, P11, rng_of(7))
    assert race.X == race.I + 1
    assert 0 <= race.I <= 5
    assert race.sigma[0] == 0.0
    assert all(a < b for a, b in zip(race.sigma, race.sigma[1:]))
    assert len(race.T) == 6


def test_star_race_zero_leaves():
    race = star_race(0, P11, rng_of(8))
    assert race.X == 1 and race.I == 0
    with pytest.raises(ValueError):
        star_race(-1, P11, rng_of(8))


def test_star_matches_engine():
    g = build_star(4)
    n = 10_000
    rng = rng_of(83)
    reduced = [star_sample_X(4, P11, rng) for _ in range(n)]
    rng = rng_of(84)
    direct = [run_to_fixation(g, P11, rng=rng).damage for _ in range(n)]
    report = distribution_compare(reduced, direct)
    assert report.passed, f"chi2 p={report.p_value}"


def test_complete_race_structure():
    trace = complete_race(6, P11, rng_of(9))
    assert trace.X == 6 - trace.W_tau
    assert 1 <= trace.X <= 6
    assert trace.tau == min(trace.sigma[-1], trace.rho_star)


def test_complete_race_rejects_alpha_zero():
    with pytest.raises(AlphaZero):
        complete_race(4, ProcessParams(1.0, 0.0), rng_of(10))
    with pytest.raises(ValueError):
        complete_race(0, P11, rng_of(10))


def test_complete_matches_engine():
    g = build_complete(5)
    n = 10_000
    rng = rng_of(85)
    reduced = [complete_sample_X(5, P11, rng) for _ in range(n)]
    rng = rng_of(86)
    direct = [run_to_fixation(g, P11, rng=rng).damage for _ in range(n)]
    report = distribution_compare(reduced, direct)
    assert report.passed, f"chi2 p={report.p_value}"


@given(st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=50, deadline=None)
def test_complete_x_bounded_by_n(seed):
    x = complete_sample_X(7, ProcessParams(2.5, 0.3), rng_of(seed))
    assert 1 <= x <= 7
