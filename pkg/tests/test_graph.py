import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from graph_bandits.graph import (
    ExactLimitExceeded,
    FeedbackGraph,
    GraphError,
    GraphSequence,
    ErdosRenyiRounds,
    clique_partition_greedy,
    erdos_renyi,
    fixture,
    format_graph_text,
    from_edge_list,
    greedy_independent_set,
    independence_number_exact,
    parse_graph_text,
)

from oracles import brute_alpha, brute_clique_partition_number


def nbhd(g, j):
    return set(g.neighborhood(j))


# -- construction -----------------------------------------------------------


def test_empty_edge_list_forces_self_loops():
    g = from_edge_list(3, [], directed=False)
    assert [nbhd(g, j) for j in range(3)] == [{0}, {1}, {2}]


def test_triangle_is_complete():
    g = from_edge_list(3, [(0, 1), (0, 2), (1, 2)], directed=False)
    assert all(nbhd(g, j) == {0, 1, 2} for j in range(3))


def test_single_directed_edge():
    g = from_edge_list(3, [(0, 1)], directed=True)
    assert nbhd(g, 0) == {0}
    assert nbhd(g, 1) == {0, 1}
    assert nbhd(g, 2) == {2}
    assert g.revealed_by(0).tolist() == [0, 1]
    assert g.revealed_by(1).tolist() == [1]


@pytest.mark.parametrize("k, edges", [(0, []), (3, [(0, 3)]), (3, [(-1, 0)])])
def test_bad_edge_lists(k, edges):
    with pytest.raises(GraphError):
        from_edge_list(k, edges, directed=False)


def test_asymmetric_undirected_rejected():
    with pytest.raises(GraphError):
        FeedbackGraph(2, False, (0b01, 0b11))


def test_missing_self_loop_rejected():
    with pytest.raises(GraphError):
        FeedbackGraph(2, True, (0b10, 0b10))


# -- fixtures ---------------------------------------------------------------


def test_star_fixture():
    g = fixture("star", 4)
    assert nbhd(g, 0) == {0, 1, 2, 3}
    assert all(nbhd(g, leaf) == {0, leaf} for leaf in (1, 2, 3))


def test_disjoint_cliques_fixture():
    g = fixture("disjoint_cliques(2)", 6)
    assert nbhd(g, 0) == {0, 1, 2}
    assert nbhd(g, 4) == {3, 4, 5}
    assert independence_number_exact(g)[0] == 2
    assert clique_partition_greedy(g).c == 2
    assert fixture("disjoint_cliques:2", 6) == g


def test_path_fixture_middle():
    assert nbhd(fixture("path", 3), 1) == {0, 1, 2}


def test_unknown_fixture():
    with pytest.raises(GraphError):
        fixture("wheel", 5)


# -- independence -----------------------------------------------------------


@pytest.mark.parametrize("name, k, alpha", [
    ("complete", 10, 1),
    ("empty", 10, 10),
    ("star", 10, 9),
    ("cycle", 5, 2),
    ("path", 7, 4),
])
def test_independence_number_fixtures(name, k, alpha):
    g = fixture(name, k)
    size, witness = independence_number_exact(g)
    assert size == alpha
    assert len(witness) == alpha and g.is_independent(witness)


def test_five_cycle_matches_enumeration():
    g = fixture("cycle", 5)
    assert independence_number_exact(g)[0] == brute_alpha(g.observes) == 2


def test_exact_limit():
    with pytest.raises(ExactLimitExceeded):
        independence_number_exact(fixture("empty", 31))
    assert independence_number_exact(fixture("empty", 31), limit=31)[0] == 31


def test_directed_independence_uses_either_direction():
    g = from_edge_list(3, [(0, 1)], directed=True)
    assert independence_number_exact(g)[0] == 2


def test_greedy_independent_set_fixtures():
    assert greedy_independent_set(fixture("empty", 5)) == frozenset(range(5))
    assert len(greedy_independent_set(fixture("complete", 5))) == 1
    assert greedy_independent_set(fixture("star", 10)) == frozenset(range(1, 10))


def test_exact_alpha_on_30_nodes_is_fast():
    g = erdos_renyi(30, 0.2, 3)
    size, witness = independence_number_exact(g)
    assert g.is_independent(witness)
    assert size >= len(greedy_independent_set(g))


# -- clique partition -------------------------------------------------------


@pytest.mark.parametrize("name, k, c", [("complete", 7, 1), ("empty", 7, 7), ("cycle", 5, 3)])
def test_clique_partition_fixtures(name, k, c):
    part = clique_partition_greedy(fixture(name, k))
    assert part.c == c


def test_clique_partition_directed_needs_both_directions():
    g = from_edge_list(3, [(0, 1), (1, 0), (1, 2)], directed=True)
    part = clique_partition_greedy(g)
    assert part.blocks == ((0, 1), (2,))


def test_block_of_inverts_blocks():
    part = clique_partition_greedy(fixture("disjoint_cliques(3)", 9))
    block_of = part.block_of()
    for idx, block in enumerate(part.blocks):
        assert all(block_of[v] == idx for v in block)


# -- random graphs ----------------------------------------------------------


def test_erdos_renyi_extremes():
    assert erdos_renyi(8, 0.0, 1) == fixture("empty", 8)
    assert erdos_renyi(8, 1.0, 1) == fixture("complete", 8)


def test_erdos_renyi_edge_count_within_four_sigma():
    k, p = 300, 0.05
    pairs = k * (k - 1) / 2
    g = erdos_renyi(k, p, 11)
    assert abs(g.edge_count - p * pairs) <= 4 * np.sqrt(pairs * p * (1 - p))


def test_erdos_renyi_directed_edge_count():
    k, p = 200, 0.1
    pairs = k * (k - 1)
    g = erdos_renyi(k, p, 5, directed=True)
    assert g.directed
    assert abs(g.edge_count - p * pairs) <= 4 * np.sqrt(pairs * p * (1 - p))


def test_erdos_renyi_deterministic():
    a = erdos_renyi(40, 0.3, 99)
    b = erdos_renyi(40, 0.3, 99)
    assert a == b and a.in_masks == b.in_masks
    assert erdos_renyi(40, 0.3, 100) != a


def test_erdos_renyi_rejects_bad_probability():
    with pytest.raises(GraphError):
        erdos_renyi(5, 1.5, 0)


def test_graph_sequences():
    fixed = GraphSequence.fixed(fixture("star", 5))
    assert fixed.is_fixed and fixed.at(0) is fixed.at(99)
    rounds = GraphSequence.per_round(12, ErdosRenyiRounds(12, 0.3, 7))
    assert not rounds.is_fixed
    assert rounds.at(3) == rounds.at(3)
    assert rounds.at(3) != rounds.at(4)
    assert {rounds.at(t).k for t in range(5)} == {12}


# -- text format ------------------------------------------------------------


def test_text_roundtrip():
    g = erdos_renyi(9, 0.4, 2, directed=True)
    assert parse_graph_text(format_graph_text(g)) == g


def test_text_comments_and_errors():
    g = parse_graph_text("# star\n3 0\n0 1  # spoke\n0 2\n")
    assert g == fixture("star", 3)
    with pytest.raises(GraphError, match="line 2"):
        parse_graph_text("3 0\n0 x\n")
    with pytest.raises(GraphError):
        parse_graph_text("3 2\n")


# -- properties -------------------------------------------------------------


def _random_graph(k, p, seed, directed=False):
    return erdos_renyi(k, p, seed, directed=directed)


@settings(max_examples=60, deadline=None)
@given(k=st.integers(1, 9), p=st.floats(0, 1), seed=st.integers(0, 2**32 - 1), directed=st.booleans())
def test_graph_invariants(k, p, seed, directed):
    g = _random_graph(k, p, seed, directed)
    m = g.observes
    assert m.diagonal().all()
    if not directed:
        assert (m == m.T).all()
    alpha, witness = independence_number_exact(g)
    assert alpha == brute_alpha(m)
    assert len(greedy_independent_set(g)) <= alpha
    part = clique_partition_greedy(g)
    assert sorted(v for b in part.blocks for v in b) == list(range(k))
    assert all(g.is_clique(b) for b in part.blocks)
    assert alpha <= brute_clique_partition_number(m) <= part.c <= k


def test_alpha_at_most_chi_bar_on_fixtures():
    for name, k in [("complete", 6), ("empty", 6), ("star", 7), ("cycle", 7), ("path", 6),
                    ("disjoint_cliques(3)", 9)]:
        g = fixture(name, k)
        assert independence_number_exact(g)[0] <= brute_clique_partition_number(g.observes)
