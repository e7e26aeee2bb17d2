"""Closed-form critical bounds and the good-site percolation witness."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.random import Generator, Philox

from chasesim.bounds import (
    INFINITE,
    BadDegree,
    BadInputs,
    expected_damage_bound,
    good_site_percolation_sim,
    good_site_prob_lower,
    is_infinite,
    lambda_lower,
    lambda_upper,
    path_survival_bound,
)
from chasesim.graphs import build_star, build_torus
from chasesim.process import ProcessParams, run_to_fixation
from chasesim.reductions import sample_X_via_jump_chain


def test_spot_values():
    assert lambda_lower(3, 1.0) == 1.0
    assert lambda_upper(3, 1.0, 0.5) == pytest.approx(4.0 / (1.0 - 2.0 ** (-1.0 / 3.0)), abs=1e-12)
    assert path_survival_bound(1.0, 1.0, 3) == 0.125


def test_lambda_lower_formula():
    assert lambda_lower(5, 2.4) == pytest.approx(2.4 / 3)
    with pytest.raises(BadInputs):
        lambda_lower(4, 0.0)


def test_degree_validation():
    for bad in (2, 1, 0, -1, 3.5):
        with pytest.raises(BadDegree):
            lambda_lower(bad, 1.0)
    with pytest.raises(BadDegree):
        lambda_upper(2, 1.0, 0.5)


def test_lambda_upper_input_validation():
    with pytest.raises(BadInputs):
        lambda_upper(3, 1.0, 0.0)
    with pytest.raises(BadInputs):
        lambda_upper(3, 1.0, 1.0)
    with pytest.raises(BadInputs):
        lambda_upper(3, 0.0, 0.5)


def test_bounds_bracket_each_other():
    for d in range(3, 9):
        for alpha in (0.5, 1.0, 2.0):
            for p_c in (0.3, 0.5, 0.7):
                assert lambda_lower(d, alpha) < lambda_upper(d, alpha, p_c)


def test_both_bounds_grow_linearly_in_alpha():
    # Theta(alpha): the ratio bound/alpha stays pinned as alpha blows up
    for alpha in (1.0, 10.0, 100.0, 1000.0):
        assert lambda_lower(4, alpha) / alpha == pytest.approx(0.5)
        hi = lambda_upper(4, alpha, 0.5) / alpha
        assert 1.0 / (1.0 - 0.5 ** 0.25) * 0.99 <= hi <= 1.05 / (1.0 - 0.5 ** 0.25) * (1 + 4 / alpha)


def test_path_survival_bound_values_and_validation():
    assert path_survival_bound(2.0, 1.0, 1) == pytest.approx(2.0 / 3.0)
    assert path_survival_bound(1.0, 1.0, 0) == 1.0
    with pytest.raises(BadInputs):
        path_survival_bound(1.0, 1.0, -1)
    with pytest.raises(BadInputs):
        path_survival_bound(1.0, 1.0, 2.5)


def test_path_survival_bound_holds_empirically():
    # P(front ever reaches height k) against the geometric-style cap
    rng = Generator(Philox(21))
    n = 20_000
    xs = [sample_X_via_jump_chain(ProcessParams(1.0, 1.0), rng) for _ in range(n)]
    for k in (2, 3, 5):
        frac = sum(x > k for x in xs) / n
        bound = path_survival_bound(1.0, 1.0, k)
        sem = math.sqrt(bound * (1 - bound) / n)
        assert frac <= bound + 3 * sem


def test_expected_damage_bound_finite_value():
    assert expected_damage_bound(0.5, 1.0, 3) == pytest.approx(4.0)
    # at tiny lam the bound collapses toward 1
    assert expected_damage_bound(1e-9, 1.0, 3) == pytest.approx(1.0, abs=1e-6)


def test_expected_damage_bound_infinite_sentinel():
    out = expected_damage_bound(2.0, 1.0, 3)  # (d-1)lam/(lam+alpha) = 4/3 >= 1
    assert is_infinite(out)
    assert out is INFINITE
    assert repr(out) == "INFINITE"
    assert not is_infinite(4.0)


def test_expected_damage_bound_dominates_truncated_mean():
    from chasesim.graphs import build_regular_tree

    tree = build_regular_tree(2, 8)
    p = ProcessParams(0.5, 1.0)
    rng = Generator(Philox(95))
    xs = [run_to_fixation(tree, p, rng=rng).damage for _ in range(3000)]
    mean = float(np.mean(xs))
    sem = float(np.std(xs, ddof=1)) / math.sqrt(len(xs))
    assert mean + 3 * sem < expected_damage_bound(0.5, 1.0, 3)


def test_good_site_prob_lower_value():
    assert good_site_prob_lower(1.0, 1.0, 4) == pytest.approx((1.0 / 6.0) ** 4)
    assert good_site_prob_lower(1.0, 0.0, 1) == pytest.approx(0.5)
    with pytest.raises(BadInputs):
        good_site_prob_lower(1.0, 1.0, 0)


@given(st.floats(min_value=0.05, max_value=20), st.floats(min_value=0.0, max_value=20),
       st.integers(min_value=1, max_value=8))
@settings(max_examples=150)
def test_good_site_prob_lower_is_a_probability(lam, alpha, d):
    q = good_site_prob_lower(lam, alpha, d)
    assert 0.0 < q <= 1.0


def test_good_site_sim_respects_lower_bound():
    g = build_torus(10, "torus")
    p = ProcessParams(1.0, 1.0)
    lower = good_site_prob_lower(1.0, 1.0, 4)
    n_sites = 0
    n_good = 0
    for s in range(20):
        sample = good_site_percolation_sim(g, p, Generator(Philox(300 + s)))
        n_sites += sample.good_mask.size
        n_good += int(sample.good_mask.sum())
    frac = n_good / n_sites
    sem = math.sqrt(lower * (1 - lower) / n_sites)
    assert frac >= lower - 3 * sem


def test_good_site_sim_cluster_is_connected_good_component():
    g = build_torus(8, "torus")
    p = ProcessParams(2.0, 0.3)
    sample = good_site_percolation_sim(g, p, Generator(Philox(17)))
    good = sample.good_mask
    if not good[0]:
        assert sample.root_cluster_size == 0
        return
    # BFS over good sites from the root must reproduce the reported size
    seen = {0}
    frontier = [0]
    while frontier:
        v = frontier.pop()
        for w in g.neighbors(v):
            w = int(w)
            if good[w] and w not in seen:
                seen.add(w)
                frontier.append(w)
    assert sample.root_cluster_size == len(seen)


def test_isolated_vertex_is_vacuously_good():
    lone = build_star(0)
    sample = good_site_percolation_sim(lone, ProcessParams(1.0, 0.0), Generator(Philox(1)))
    assert sample.good_mask.tolist() == [True]
    assert sample.root_cluster_size == 1
