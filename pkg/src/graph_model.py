#!/usr/bin/env python3
"""
Colored Network Model
Directed sensor graphs with per-node colors and trusted flags, plus the
reachability and strong-robustness predicates checked by brute force
"""

import itertools
import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple, Union

import networkx as nx
import numpy as np

from src.errors import InputError, SizeLimitError
from src.settings import setting

logger = logging.getLogger(__name__)

INFINITY = math.inf

Edge = Tuple[int, int]


class ReachCondition(str, Enum):
    """Which clause made a set reachable, in tie-break order"""
    TRUST = "TRUST"
    DIVERSITY = "DIVERSITY"
    REDUNDANCY = "REDUNDANCY"


@dataclass(frozen=True)
class ReachabilityParams:
    """Redundancy level r; INFINITY disables the redundancy clause"""
    r: Union[int, float] = 1

    def __post_init__(self):
        if self.r != INFINITY and (int(self.r) != self.r or self.r < 1):
            raise InputError(f"r must be a positive integer or INFINITY, got {self.r}")

    @property
    def redundancy_enabled(self) -> bool:
        return self.r != INFINITY


@dataclass(frozen=True)
class ReachabilityResult:
    reachable: bool
    witness: Optional[Tuple[int, ReachCondition]] = None

    def __bool__(self) -> bool:
        return self.reachable


@dataclass(frozen=True)
class RobustnessResult:
    robust: bool
    counterexample: Optional[FrozenSet[int]] = None

    def __bool__(self) -> bool:
        return self.robust


class _Masks:
    """Bitmask view of a network for fast subset enumeration"""

    def __init__(self, net: 'ColoredNetwork'):
        n = net.node_count
        self.in_mask = [0] * n
        for j, i in net.graph.edges():
            self.in_mask[i] |= 1 << j
        self.trusted = 0
        for t in net.trusted:
            self.trusted |= 1 << t
        by_color: Dict[int, int] = {}
        for node, color in net.colors.items():
            by_color[color] = by_color.get(color, 0) | (1 << node)
        self.color_masks = [by_color[c] for c in sorted(by_color)]

    def condition(self, node: int, outside: int, r: Union[int, float]) -> Optional[ReachCondition]:
        """Strongest clause node satisfies given its in-neighbors outside C"""
        out = self.in_mask[node] & outside
        if out & self.trusted:
            return ReachCondition.TRUST
        if len(self.color_masks) >= 3:
            seen = 0
            for cm in self.color_masks:
                if out & cm:
                    seen += 1
                    if seen == 3:
                        return ReachCondition.DIVERSITY
        if r != INFINITY and out.bit_count() >= r:
            return ReachCondition.REDUNDANCY
        return None

    def reachable(self, c_mask: int, members: Iterable[int], r: Union[int, float]) -> bool:
        outside = ~c_mask
        for node in members:
            if self.condition(node, outside, r) is not None:
                return True
        return False


class ColoredNetwork:
    """
    Directed graph G = (V, E) on nodes 0..N-1 where an edge (j, i) means
    j transmits to i. Every node carries one integer color and a trusted flag.
    """

    def __init__(self, node_count: int, edges: Iterable[Edge] = (),
                 colors: Optional[Dict[int, int]] = None,
                 trusted: Iterable[int] = ()):
        if int(node_count) != node_count or node_count < 1:
            raise InputError(f"node_count must be a positive integer, got {node_count}")
        self.graph = nx.DiGraph()
        self.graph.add_nodes_from(range(node_count), color=0, trusted=False)
        self._masks: Optional[_Masks] = None

        for j, i in edges:
            self.add_edge(j, i)
        for node, color in (colors or {}).items():
            self.set_color(node, color)
        for node in trusted:
            self.add_trusted(node)

    # ------------------------------------------------------------------
    # Construction
    # ------------------------------------------------------------------

    @classmethod
    def from_undirected(cls, node_count: int, edges: Iterable[Edge] = (),
                        colors: Optional[Dict[int, int]] = None,
                        trusted: Iterable[int] = ()) -> 'ColoredNetwork':
        """Each undirected edge {a, b} becomes (a, b) and (b, a)"""
        directed = []
        for a, b in edges:
            directed.append((a, b))
            directed.append((b, a))
        return cls(node_count, directed, colors, trusted)

    def _check_node(self, node: int) -> int:
        if not isinstance(node, (int, np.integer)) or not 0 <= node < self.node_count:
            raise InputError(f"node id {node} out of range [0, {self.node_count})")
        return int(node)

    def add_edge(self, j: int, i: int) -> None:
        j, i = self._check_node(j), self._check_node(i)
        if j == i:
            raise InputError(f"self-loop on node {i} is not allowed")
        self.graph.add_edge(j, i)
        self._masks = None

    def add_trusted(self, node: int) -> None:
        self.graph.nodes[self._check_node(node)]['trusted'] = True
        self._masks = None

    def set_color(self, node: int, color: int) -> None:
        if int(color) != color or color < 0:
            raise InputError(f"color id must be a non-negative integer, got {color}")
        self.graph.nodes[self._check_node(node)]['color'] = int(color)
        self._masks = None

    def copy(self) -> 'ColoredNetwork':
        return ColoredNetwork(self.node_count, self.edges, self.colors, self.trusted)

    def with_trusted(self, trusted: Iterable[int]) -> 'ColoredNetwork':
        """Copy with the trusted set replaced"""
        return ColoredNetwork(self.node_count, self.edges, self.colors, trusted)

    def with_colors(self, colors: Dict[int, int]) -> 'ColoredNetwork':
        """Copy with the coloring replaced (missing nodes get color 0)"""
        full = {node: colors.get(node, 0) for node in range(self.node_count)}
        return ColoredNetwork(self.node_count, self.edges, full, self.trusted)

    # ------------------------------------------------------------------
    # Queries
    # ------------------------------------------------------------------

    @property
    def node_count(self) -> int:
        return self.graph.number_of_nodes()

    @property
    def nodes(self) -> List[int]:
        return list(range(self.node_count))

    @property
    def edges(self) -> Set[Edge]:
        return set(self.graph.edges())

    @property
    def colors(self) -> Dict[int, int]:
        return {node: data['color'] for node, data in self.graph.nodes(data=True)}

    @property
    def trusted(self) -> FrozenSet[int]:
        return frozenset(node for node, data in self.graph.nodes(data=True) if data['trusted'])

    def color(self, node: int) -> int:
        return self.graph.nodes[self._check_node(node)]['color']

    def is_trusted(self, node: int) -> bool:
        return self.graph.nodes[self._check_node(node)]['trusted']

    def in_neighbors(self, node: int) -> Set[int]:
        return set(self.graph.predecessors(self._check_node(node)))

    def out_neighbors(self, node: int) -> Set[int]:
        return set(self.graph.successors(self._check_node(node)))

    def masks(self) -> _Masks:
        if self._masks is None:
            self._masks = _Masks(self)
        return self._masks

    def __eq__(self, other) -> bool:
        if not isinstance(other, ColoredNetwork):
            return NotImplemented
        return (self.node_count == other.node_count and self.edges == other.edges
                and self.colors == other.colors and self.trusted == other.trusted)

    def __repr__(self) -> str:
        return (f"ColoredNetwork(N={self.node_count}, |E|={self.graph.number_of_edges()}, "
                f"colors={len(distinct_colors(self))}, trusted={sorted(self.trusted)})")


def _node_set(net: ColoredNetwork, nodes: Iterable[int]) -> FrozenSet[int]:
    return frozenset(net._check_node(node) for node in nodes)


def _mask_of(nodes: Iterable[int]) -> int:
    mask = 0
    for node in nodes:
        mask |= 1 << node
    return mask


# ============================================================================
# PREDICATES
# ============================================================================

def in_neighbors(net: ColoredNetwork, i: int) -> Set[int]:
    """N_i = { j : (j, i) in E }"""
    return net.in_neighbors(i)


def distinct_colors(net: ColoredNetwork) -> List[int]:
    return sorted(set(net.colors.values()))


def reachable_from(net: ColoredNetwork, sources: Iterable[int]) -> Set[int]:
    """Nodes reachable from the sources by directed paths (sources included)"""
    found: Set[int] = set()
    for s in _node_set(net, sources):
        found.add(s)
        found |= nx.descendants(net.graph, s)
    return found


def is_reachable_set(net: ColoredNetwork, C: Iterable[int],
                     params: ReachabilityParams) -> ReachabilityResult:
    """
    C is reachable if some i in C has r in-neighbors outside C (redundancy),
    three distinct colors among them (diversity), or a trusted one (trust).

    The witness prefers TRUST, then DIVERSITY, then REDUNDANCY; within a
    clause the lowest node id wins.
    """
    members = sorted(_node_set(net, C))
    if not members:
        raise InputError("reachability is defined for non-empty sets only")

    masks = net.masks()
    outside = ~_mask_of(members)
    best: Optional[Tuple[int, ReachCondition]] = None
    order = list(ReachCondition)
    for node in members:
        cond = masks.condition(node, outside, params.r)
        if cond is None:
            continue
        if best is None or order.index(cond) < order.index(best[1]):
            best = (node, cond)
            if cond is ReachCondition.TRUST:
                break

    return ReachabilityResult(best is not None, best)


def is_strongly_robust_bruteforce(net: ColoredNetwork, S: Iterable[int],
                                  params: ReachabilityParams,
                                  max_nodes: Optional[int] = None) -> RobustnessResult:
    """
    Check every non-empty C subset of V\\S for reachability.

    Subsets are visited by increasing size, then lexicographically, so the
    first failure is a minimum-cardinality counterexample.
    """
    cap = max_nodes if max_nodes is not None else setting('limits', 'bruteforce_max_nodes')
    if net.node_count > cap:
        raise SizeLimitError("robustness brute force", net.node_count, cap)

    sources = _node_set(net, S)
    rest = [node for node in net.nodes if node not in sources]
    masks = net.masks()

    for size in range(1, len(rest) + 1):
        for subset in itertools.combinations(rest, size):
            if not masks.reachable(_mask_of(subset), subset, params.r):
                logger.debug("[ROBUST] counterexample %s for r=%s", subset, params.r)
                return RobustnessResult(False, frozenset(subset))

    return RobustnessResult(True, None)


# ============================================================================
# GRAPH FILE FORMAT
# ============================================================================

def parse_graph_text(text: str, source: str = "<text>") -> ColoredNetwork:
    """
    Parse the line format:
        N <count>
        E <j> <i>      directed edge j -> i
        U <a> <b>      undirected edge, stored as two directed edges
        C <i> <color>  at most one per node, default 0
        T <i>          trusted node
    """
    node_count = None
    edges: List[Edge] = []
    colors: Dict[int, int] = {}
    trusted: List[int] = []

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        tag, args = parts[0].upper(), parts[1:]
        try:
            values = [int(a) for a in args]
        except ValueError:
            raise InputError(f"{source}:{lineno}: non-integer field in '{raw.strip()}'")

        expected = {'N': 1, 'E': 2, 'U': 2, 'C': 2, 'T': 1}
        if tag not in expected:
            raise InputError(f"{source}:{lineno}: unknown directive '{parts[0]}'")
        if len(values) != expected[tag]:
            raise InputError(f"{source}:{lineno}: '{tag}' expects {expected[tag]} fields")

        if tag == 'N':
            if node_count is not None:
                raise InputError(f"{source}:{lineno}: duplicate N header")
            node_count = values[0]
            continue
        if node_count is None:
            raise InputError(f"{source}:{lineno}: N header must come first")
        for node in values[:1] if tag == 'C' else values:
            if not 0 <= node < node_count:
                raise InputError(f"{source}:{lineno}: unknown node id {node}")

        if tag == 'E':
            edges.append((values[0], values[1]))
        elif tag == 'U':
            edges.append((values[0], values[1]))
            edges.append((values[1], values[0]))
        elif tag == 'C':
            if values[0] in colors:
                raise InputError(f"{source}:{lineno}: duplicate color for node {values[0]}")
            colors[values[0]] = values[1]
        else:
            trusted.append(values[0])

    if node_count is None:
        raise InputError(f"{source}: missing N header")

    return ColoredNetwork(node_count, edges, colors, trusted)


def load_graph_file(path: Union[str, Path]) -> ColoredNetwork:
    path = Path(path)
    with open(path, 'r') as f:
        return parse_graph_text(f.read(), str(path))


def format_graph(net: ColoredNetwork) -> str:
    lines = [f"N {net.node_count}"]
    lines += [f"E {j} {i}" for j, i in sorted(net.edges)]
    lines += [f"C {node} {color}" for node, color in sorted(net.colors.items())]
    lines += [f"T {node}" for node in sorted(net.trusted)]
    return "\n".join(lines) + "\n"


def write_graph_file(net: ColoredNetwork, path: Union[str, Path]) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w') as f:
        f.write(format_graph(net))
    return str(path)


# ============================================================================
# GENERATORS
# ============================================================================

def random_network(n: int, density: float, n_colors: int = 1,
                   trusted_fraction: float = 0.0,
                   rng: Optional[np.random.Generator] = None) -> ColoredNetwork:
    """G(n, p) digraph with uniformly drawn colors and a random trusted subset"""
    rng = rng if rng is not None else np.random.default_rng(0)
    g = nx.gnp_random_graph(n, density, seed=int(rng.integers(2**31)), directed=True)
    colors = {node: int(c) for node, c in enumerate(rng.integers(n_colors, size=n))}
    n_trusted = int(round(trusted_fraction * n))
    trusted = rng.choice(n, size=n_trusted, replace=False).tolist() if n_trusted else []
    return ColoredNetwork(n, g.edges(), colors, trusted)


def star_network(n: int) -> ColoredNetwork:
    """Undirected star: center 0, leaves 1..n-1"""
    return ColoredNetwork.from_undirected(n, nx.star_graph(n - 1).edges())


def ring_network(n: int) -> ColoredNetwork:
    return ColoredNetwork.from_undirected(n, nx.cycle_graph(n).edges())


def complete_network(n: int) -> ColoredNetwork:
    return ColoredNetwork(n, nx.complete_graph(n, create_using=nx.DiGraph).edges())


def random_directed_tree(n: int, rng: Optional[np.random.Generator] = None) -> ColoredNetwork:
    """Arborescence rooted at 0: each node v > 0 hears from one earlier parent"""
    rng = rng if rng is not None else np.random.default_rng(0)
    edges = [(int(rng.integers(v)), v) for v in range(1, n)]
    return ColoredNetwork(n, edges)


if __name__ == "__main__":
    net = ColoredNetwork.from_undirected(4, [(0, 1), (1, 2), (2, 3), (3, 0)],
                                         colors={0: 0, 1: 1, 2: 2, 3: 0}, trusted=[0])
    print(net)
    print("N_1 =", in_neighbors(net, 1))
    result = is_strongly_robust_bruteforce(net, {0}, ReachabilityParams(2))
    print(f"strongly (2, colors, trust)-robust w.r.t. {{0}}: {result.robust}"
          f" counterexample={sorted(result.counterexample or [])}")
