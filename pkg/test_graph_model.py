"""
Graph Model Tests
Neighborhoods, reachability witnesses, brute-force robustness and the graph file format
"""

import itertools

import numpy as np
import pytest

from src.errors import InputError, SizeLimitError
from src.graph_model import (INFINITY, ColoredNetwork, ReachabilityParams, ReachCondition,
                             complete_network, distinct_colors, format_graph, in_neighbors,
                             is_reachable_set, is_strongly_robust_bruteforce, load_graph_file,
                             parse_graph_text, random_network, reachable_from, write_graph_file)


# ============================================================================
# Neighborhoods
# ============================================================================

class TestInNeighbors:

    def test_chain(self):
        chain = ColoredNetwork(3, [(0, 1), (1, 2)])
        assert in_neighbors(chain, 1) == {0}
        assert in_neighbors(chain, 0) == set()

    def test_complete_digraph(self):
        k4 = complete_network(4)
        for i in range(4):
            assert in_neighbors(k4, i) == set(range(4)) - {i}

    def test_out_of_range_node(self):
        chain = ColoredNetwork(3, [(0, 1), (1, 2)])
        with pytest.raises(InputError):
            in_neighbors(chain, 3)
        with pytest.raises(InputError):
            in_neighbors(chain, -1)

    def test_undirected_edges_become_two_arcs(self):
        net = ColoredNetwork.from_undirected(3, [(0, 1), (1, 2)])
        assert net.edges == {(0, 1), (1, 0), (1, 2), (2, 1)}

    def test_self_loop_rejected(self):
        with pytest.raises(InputError):
            ColoredNetwork(2, [(1, 1)])

    def test_reachable_from_follows_direction(self):
        chain = ColoredNetwork(4, [(0, 1), (1, 2)])
        assert reachable_from(chain, {0}) == {0, 1, 2}
        assert reachable_from(chain, {2}) == {2}


# ============================================================================
# Reachable sets
# ============================================================================

def _hub(colors, trusted=()):
    """Node 0 hears from nodes 1..len(colors)"""
    n = len(colors) + 1
    palette = {i + 1: c for i, c in enumerate(colors)}
    return ColoredNetwork(n, [(j, 0) for j in range(1, n)], palette, trusted)


class TestReachableSet:

    def test_trusted_neighbor_outside(self):
        net = _hub([0], trusted=[1])
        result = is_reachable_set(net, {0}, ReachabilityParams(3))
        assert result.reachable
        assert result.witness == (0, ReachCondition.TRUST)

    def test_three_colors_prefer_diversity_over_redundancy(self):
        net = _hub([0, 1, 2])
        result = is_reachable_set(net, {0}, ReachabilityParams(3))
        assert result
        assert result.witness == (0, ReachCondition.DIVERSITY)

    def test_two_same_colored_neighbors_fail(self):
        net = _hub([0, 0])
        result = is_reachable_set(net, {0}, ReachabilityParams(3))
        assert not result
        assert result.witness is None

    def test_infinite_r_disables_redundancy(self):
        net = _hub([0] * 5)
        assert not is_reachable_set(net, {0}, ReachabilityParams(INFINITY))
        assert is_reachable_set(net, {0}, ReachabilityParams(5)).witness == (0, ReachCondition.REDUNDANCY)

    def test_witness_prefers_trust_across_members(self):
        # node 1 satisfies redundancy, node 2 has a trusted neighbor
        net = ColoredNetwork(5, [(3, 1), (4, 1), (0, 2)], trusted=[0])
        result = is_reachable_set(net, {1, 2}, ReachabilityParams(2))
        assert result.witness == (2, ReachCondition.TRUST)

    def test_lowest_node_within_clause(self):
        net = ColoredNetwork(3, [(0, 1), (0, 2)], trusted=[0])
        assert is_reachable_set(net, {1, 2}, ReachabilityParams(1)).witness == (1, ReachCondition.TRUST)

    def test_neighbors_inside_c_do_not_count(self):
        net = ColoredNetwork(3, [(1, 0), (2, 0)], trusted=[1])
        assert not is_reachable_set(net, {0, 1, 2}, ReachabilityParams(1))

    def test_empty_set_rejected(self):
        with pytest.raises(InputError):
            is_reachable_set(complete_network(3), set(), ReachabilityParams(1))

    def test_invalid_r(self):
        with pytest.raises(InputError):
            ReachabilityParams(0)
        with pytest.raises(InputError):
            ReachabilityParams(2.5)


# ============================================================================
# Strong robustness by enumeration
# ============================================================================

class TestBruteforceRobustness:

    def test_all_sources_is_vacuous(self, k7):
        assert is_strongly_robust_bruteforce(k7, set(k7.nodes), ReachabilityParams(100)).robust

    def test_complete_graph_single_source(self):
        k5 = complete_network(5)
        assert is_strongly_robust_bruteforce(k5, {0}, ReachabilityParams(1))
        # with r = 4 a single source cannot feed two outsiders at once
        result = is_strongly_robust_bruteforce(k5, {0}, ReachabilityParams(4))
        assert not result
        assert result.counterexample == frozenset({1, 2})

    def test_complete_graph_four_sources(self):
        k5 = complete_network(5)
        assert is_strongly_robust_bruteforce(k5, {0, 1, 2, 3}, ReachabilityParams(4))

    def test_isolated_nodes(self):
        pair = ColoredNetwork(2)
        result = is_strongly_robust_bruteforce(pair, {0}, ReachabilityParams(1))
        assert not result.robust
        assert result.counterexample == frozenset({1})

    def test_counterexample_has_minimum_size(self):
        chain = ColoredNetwork(4, [(0, 1), (1, 2), (2, 3)])
        result = is_strongly_robust_bruteforce(chain, {0}, ReachabilityParams(2))
        assert result.counterexample == frozenset({1})

    def test_size_cap(self, k7):
        with pytest.raises(SizeLimitError) as info:
            is_strongly_robust_bruteforce(k7, {0}, ReachabilityParams(1), max_nodes=6)
        assert info.value.cap == 6

    def test_monotone_in_r_and_trust(self):
        rng = np.random.default_rng(3)
        for _ in range(40):
            net = random_network(7, 0.5, 3, 0.0, rng)
            S = {0, 1}
            robust = [is_strongly_robust_bruteforce(net, S, ReachabilityParams(r)).robust
                      for r in range(1, 5)]
            # once robustness is lost it never comes back for larger r
            assert robust == sorted(robust, reverse=True)
            if robust[1]:
                hardened = net.with_trusted([4])
                assert is_strongly_robust_bruteforce(hardened, S, ReachabilityParams(2)).robust

    def test_adding_edges_keeps_robustness(self):
        rng = np.random.default_rng(5)
        checked = 0
        for _ in range(40):
            net = random_network(7, 0.45, 3, 0.0, rng)
            S = {0, 1, 2}
            for r in (1, 2, 3):
                if not is_strongly_robust_bruteforce(net, S, ReachabilityParams(r)).robust:
                    continue
                denser = net.copy()
                for _ in range(3):
                    j, i = rng.choice(7, size=2, replace=False)
                    denser.add_edge(int(j), int(i))
                assert is_strongly_robust_bruteforce(denser, S, ReachabilityParams(r)).robust
                checked += 1
        assert checked > 0

    def test_infinity_drops_the_count_clause(self):
        def trust_or_colors_only(net, S):
            rest = [i for i in net.nodes if i not in S]
            for size in range(1, len(rest) + 1):
                for C in itertools.combinations(rest, size):
                    outside = [set(in_neighbors(net, i)) - set(C) for i in C]
                    if not any(nbrs & net.trusted or len({net.color(j) for j in nbrs}) >= 3
                               for nbrs in outside):
                        return False
            return True

        rng = np.random.default_rng(9)
        for _ in range(60):
            net = random_network(6, 0.6, 3, float(rng.choice([0.0, 0.2])), rng)
            S = {0, 1}
            at_infinity = is_strongly_robust_bruteforce(net, S, ReachabilityParams(INFINITY)).robust
            assert at_infinity == trust_or_colors_only(net, S)
            # no node has N in-neighbors, so r = N never fires either
            assert at_infinity == is_strongly_robust_bruteforce(net, S, ReachabilityParams(6)).robust


# ============================================================================
# File format
# ============================================================================

class TestGraphFile:

    def test_parse(self):
        net = parse_graph_text("""
            # two colors, one trusted node
            N 4
            E 0 1
            U 1 2
            C 2 1
            T 0
        """)
        assert net.node_count == 4
        assert net.edges == {(0, 1), (1, 2), (2, 1)}
        assert net.colors == {0: 0, 1: 0, 2: 1, 3: 0}
        assert net.trusted == frozenset({0})
        assert distinct_colors(net) == [0, 1]

    @pytest.mark.parametrize("text", [
        "E 0 1",                  # no header
        "N 2\nE 0 2",             # unknown node
        "N 2\nC 0 1\nC 0 2",      # duplicate color
        "N 2\nX 0",               # unknown directive
        "N 2\nE 0",               # missing field
        "N 2\nE 0 a",             # not an integer
        "",                       # empty file
    ])
    def test_malformed(self, text):
        with pytest.raises(InputError):
            parse_graph_text(text)

    def test_write_then_load(self, tmp_path, levels_network):
        path = write_graph_file(levels_network, tmp_path / "levels.txt")
        assert load_graph_file(path) == levels_network
        assert format_graph(load_graph_file(path)) == format_graph(levels_network)

    def test_scenario_graph_files_load(self, scenario_dir):
        k7 = load_graph_file(scenario_dir / "k7.txt")
        assert k7 == complete_network(7)
        mono = load_graph_file(scenario_dir / "mono12.txt")
        assert distinct_colors(mono) == [0, 1, 2]
        assert sum(1 for c in mono.colors.values() if c == 0) == 5
