import numpy as np
import pytest
from scipy.optimize import linprog

from graph_bandits.graph import erdos_renyi, fixture, from_edge_list, greedy_independent_set, independence_number_exact
from graph_bandits.lp import (
    LPError,
    certificate_gap,
    independent_set_witness,
    min_neighborhood_mass,
    simplex_max,
    solve_max_min_exploration,
)

from corpus import grid_steps, small_corpus, undirected_corpus
from oracles import grid_max_min


def check_solution(g, dist):
    s = dist.s
    assert s.min() >= 0.0
    assert abs(s.sum() - 1.0) <= 1e-12
    assert abs(dist.value - min_neighborhood_mass(g, s)) <= 1e-9
    assert 1.0 / g.k - 1e-12 <= dist.value <= 1.0 + 1e-12
    assert dist.gap <= 1e-7
    assert certificate_gap(g, dist) <= 1e-7


def test_complete_graph_value_one():
    dist = solve_max_min_exploration(fixture("complete", 10))
    assert dist.value == pytest.approx(1.0, abs=1e-12)


def test_path3_puts_mass_on_middle():
    dist = solve_max_min_exploration(fixture("path", 3))
    np.testing.assert_allclose(dist.s, [0, 1, 0], atol=1e-12)
    assert dist.value == pytest.approx(1.0)


def test_five_cycle_uniform():
    g = fixture("cycle", 5)
    dist = solve_max_min_exploration(g)
    assert dist.value == pytest.approx(0.6, abs=1e-12)
    np.testing.assert_allclose(dist.s, np.full(5, 0.2), atol=1e-12)
    check_solution(g, dist)


def test_five_cycle_fine_grid():
    assert grid_max_min(fixture("cycle", 5).observes, steps=200) == pytest.approx(0.6)


def test_empty_graph_uniform():
    dist = solve_max_min_exploration(fixture("empty", 4))
    np.testing.assert_allclose(dist.s, np.full(4, 0.25), atol=1e-12)
    assert dist.value == pytest.approx(0.25)


def test_directed_graph_solution():
    g = from_edge_list(3, [(0, 1), (0, 2)], directed=True)
    dist = solve_max_min_exploration(g)
    np.testing.assert_allclose(dist.s, [1, 0, 0], atol=1e-12)
    check_solution(g, dist)


def test_results_are_cached_and_frozen():
    g = erdos_renyi(12, 0.3, 4)
    a = solve_max_min_exploration(g)
    assert solve_max_min_exploration(erdos_renyi(12, 0.3, 4)) is a
    with pytest.raises(ValueError):
        a.s[0] = 1.0


# -- witness ----------------------------------------------------------------


def test_witness_on_star():
    w = independent_set_witness(fixture("star", 4), [0])
    np.testing.assert_array_equal(w.s, [1, 0, 0, 0])
    assert w.value == 1.0


def test_witness_on_five_cycle():
    w = independent_set_witness(fixture("cycle", 5), {0, 2})
    assert w.value == pytest.approx(0.5)


def test_witness_rejects_non_maximal():
    with pytest.raises(ValueError, match="not maximal"):
        independent_set_witness(fixture("path", 4), [0])


def test_witness_rejects_dependent_set():
    with pytest.raises(ValueError, match="not independent"):
        independent_set_witness(fixture("path", 4), [0, 1])


def test_lp_dominates_witness():
    for g in undirected_corpus(60, max_k=12, seed=3):
        dist = solve_max_min_exploration(g)
        w = independent_set_witness(g, greedy_independent_set(g))
        assert dist.value >= w.value - 1e-9
        alpha = independence_number_exact(g)[0]
        assert dist.value >= 1.0 / alpha - 1e-9


# -- cross-checks -----------------------------------------------------------


def scipy_value(g):
    k = g.k
    m = g.observes.astype(float)
    # variables (s, t): maximize t, t <= s @ M[:, j], sum s = 1
    c = np.zeros(k + 1)
    c[-1] = -1.0
    a_ub = np.hstack([-m.T, np.ones((k, 1))])
    res = linprog(c, A_ub=a_ub, b_ub=np.zeros(k), A_eq=[[1.0] * k + [0.0]], b_eq=[1.0],
                  bounds=[(0, None)] * k + [(None, None)], method="highs")
    assert res.status == 0
    return -res.fun


@pytest.mark.parametrize("k, p, directed", [(8, 0.3, False), (20, 0.1, False), (40, 0.5, False),
                                            (25, 0.2, True), (60, 0.05, True), (120, 0.75, False)])
def test_matches_scipy(k, p, directed):
    g = erdos_renyi(k, p, k, directed=directed)
    dist = solve_max_min_exploration(g)
    check_solution(g, dist)
    assert dist.value == pytest.approx(scipy_value(g), abs=1e-8)


def test_grid_oracle_small_graphs():
    for g in small_corpus(20, seed=11):
        if g.k > 5:
            continue
        value = solve_max_min_exploration(g).value
        grid = grid_max_min(g.observes, grid_steps(g.k))
        assert grid <= value + 1e-9
        assert value - grid <= 1 / 50


def test_large_sparse_graph_solves():
    g = erdos_renyi(300, 0.05, 1)
    check_solution(g, solve_max_min_exploration(g))


# -- general simplex --------------------------------------------------------


def test_simplex_textbook_problem():
    # max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18  ->  (2, 6), 36
    x, obj, y = simplex_max([3, 5], a_ub=[[1, 0], [0, 2], [3, 2]], b_ub=[4, 12, 18])
    np.testing.assert_allclose(x, [2, 6])
    assert obj == pytest.approx(36)
    np.testing.assert_allclose(y, [0, 1.5, 1])


def test_simplex_with_equalities():
    # max x + 2y + 3z, x + y + z = 1, z <= 0.5
    x, obj, _ = simplex_max([1, 2, 3], a_ub=[[0, 0, 1]], b_ub=[0.5], a_eq=[[1, 1, 1]], b_eq=[1])
    np.testing.assert_allclose(x, [0, 0.5, 0.5])
    assert obj == pytest.approx(2.5)


def test_simplex_infeasible():
    with pytest.raises(LPError):
        simplex_max([1, 1], a_ub=[[1, 1]], b_ub=[1], a_eq=[[1, 1]], b_eq=[2])


def test_simplex_rejects_negative_rhs():
    with pytest.raises(LPError):
        simplex_max([1], a_ub=[[1]], b_ub=[-1])


def test_simplex_degenerate_cycling_example():
    # Beale's example cycles under the textbook rule without anti-cycling
    c = [0.75, -150, 0.02, -6]
    a = [[0.25, -60, -0.04, 9], [0.5, -90, -0.02, 3], [0, 0, 1, 0]]
    x, obj, _ = simplex_max(c, a_ub=a, b_ub=[0, 0, 1])
    assert obj == pytest.approx(0.05)
