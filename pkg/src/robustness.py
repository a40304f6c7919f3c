#!/usr/bin/env python3
"""
MEDAG Construction
Round-based activation that builds one mode estimation DAG per unstable
mode and decides strong robustness in polynomial time
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple, Union

import numpy as np

from src.adversary import is_f_local
from src.errors import InputError
from src.graph_model import INFINITY, ColoredNetwork, distinct_colors
from src.settings import setting, substream

logger = logging.getLogger(__name__)

MONO_ONLY = "MONO_ONLY"

FilterLevel = Union[int, str]


def redundancy_for(f: FilterLevel) -> Optional[int]:
    """2f+1, or None when the count trigger is disabled"""
    if f == MONO_ONLY:
        return None
    if isinstance(f, bool) or not isinstance(f, (int, np.integer)) or f < 0:
        raise InputError(f"f must be a non-negative integer or {MONO_ONLY}, got {f!r}")
    return 2 * int(f) + 1


@dataclass
class Medag:
    """
    Mode estimation DAG for mode j. Only activated nodes appear in
    `neighbors` and `activation_round`; sources sit in round 0 with no
    neighbors.
    """
    mode: int
    node_count: int
    sources: FrozenSet[int]
    f: FilterLevel
    neighbors: Dict[int, FrozenSet[int]] = field(default_factory=dict)
    activation_round: Dict[int, int] = field(default_factory=dict)
    terminated: bool = False

    @property
    def last_round(self) -> int:
        """T_j"""
        return max(self.activation_round.values(), default=0)

    def is_activated(self, node: int) -> bool:
        return node in self.activation_round

    def unactivated(self) -> List[int]:
        return [i for i in range(self.node_count) if i not in self.activation_round]

    def levels(self) -> List[List[int]]:
        buckets: List[List[int]] = [[] for _ in range(self.last_round + 1)]
        for node, q in sorted(self.activation_round.items()):
            buckets[q].append(node)
        return buckets


# ============================================================================
# ACTIVATION
# ============================================================================

def _triggered(net: ColoredNetwork, informants: FrozenSet[int], redundancy: Optional[int]) -> bool:
    if any(net.is_trusted(j) for j in informants):
        return True
    if len({net.color(j) for j in informants}) >= 3:
        return True
    return redundancy is not None and len(informants) >= redundancy


def activation_rounds(net: ColoredNetwork, S: Iterable[int],
                      redundancy: Optional[Union[int, float]]) -> Tuple[Dict[int, int], Dict[int, FrozenSet[int]]]:
    """
    Synchronous activation from S. An inactive node activates once its
    active in-neighbors number at least `redundancy`, span three colors, or
    include a trusted node; its informant list freezes at that moment.

    redundancy None (or INFINITY) disables the count trigger.
    """
    if redundancy == INFINITY:
        redundancy = None
    sources = frozenset(S)
    for s in sources:
        if not 0 <= s < net.node_count:
            raise InputError(f"source node {s} out of range [0, {net.node_count})")

    rounds = {s: 0 for s in sources}
    informants = {s: frozenset() for s in sources}
    in_nbrs = {i: frozenset(net.in_neighbors(i)) for i in net.nodes}

    for q in range(1, net.node_count + 1):
        active = frozenset(rounds)
        woken = {}
        for i in net.nodes:
            if i in rounds:
                continue
            heard = in_nbrs[i] & active
            if heard and _triggered(net, heard, redundancy):
                woken[i] = heard
        if not woken:
            break
        for i, heard in woken.items():
            rounds[i] = q
            informants[i] = heard

    return rounds, informants


def build_medag(net: ColoredNetwork, S_j: Iterable[int], f: FilterLevel, mode: int = 0) -> Medag:
    sources = frozenset(S_j)
    rounds, informants = activation_rounds(net, sources, redundancy_for(f))
    medag = Medag(
        mode=mode,
        node_count=net.node_count,
        sources=sources,
        f=f,
        neighbors=informants,
        activation_round=rounds,
        terminated=bool(sources) and len(rounds) == net.node_count,
    )
    logger.debug("[MEDAG] mode %d f=%s: %d/%d activated in %d rounds", mode, f,
                 len(rounds), net.node_count, medag.last_round)
    return medag


def is_strongly_robust(net: ColoredNetwork, S_j: Iterable[int], f: FilterLevel) -> bool:
    """Strong (2f+1, colors, trust)-robustness w.r.t. S_j, decided by MEDAG termination"""
    return build_medag(net, S_j, f).terminated


def is_strongly_robust_r(net: ColoredNetwork, S: Iterable[int], r: Union[int, float]) -> bool:
    """Same decision for any redundancy level r (INFINITY allowed)"""
    sources = frozenset(S)
    if not sources:
        return False
    rounds, _ = activation_rounds(net, sources, r)
    return len(rounds) == net.node_count


def max_redundancy(net: ColoredNetwork, S: Iterable[int]) -> int:
    """Largest finite r in 1..N with strong robustness w.r.t. S, 0 if none"""
    sources = frozenset(S)
    best = 0
    for r in range(1, net.node_count + 1):
        if not is_strongly_robust_r(net, sources, r):
            break
        best = r
    return best


# ============================================================================
# VALIDATION
# ============================================================================

@dataclass
class MedagValidation:
    passed: bool
    vacuous: bool = False
    sets_checked: int = 0
    failure: Optional[str] = None
    failing_set: Optional[FrozenSet[int]] = None

    def __bool__(self) -> bool:
        return self.passed


def level_partition(medag: Medag, regular: Iterable[int]) -> Dict[int, int]:
    """
    Levels of the regular nodes: sources at 0, then each node one above the
    highest level among its regular MEDAG neighbors. Nodes caught in a cycle
    never get a level.
    """
    regular = set(regular)
    level = {i: 0 for i in medag.sources if i in regular}
    pending = [i for i in sorted(regular) if i not in level and i in medag.neighbors]
    q = 0
    while pending:
        q += 1
        placed = [i for i in pending
                  if all(l in level and level[l] < q for l in medag.neighbors[i] & regular)]
        if not placed:
            break
        for i in placed:
            level[i] = q
        pending = [i for i in pending if i not in level]
    return level


def _check_against(net: ColoredNetwork, medag: Medag, A: FrozenSet[int]) -> Optional[str]:
    redundancy = redundancy_for(medag.f)
    regular = [i for i in net.nodes if i not in A]

    for i in regular:
        if i not in medag.neighbors:
            return f"regular node {i} is not in the MEDAG"
        nbrs = medag.neighbors[i]
        if i in medag.sources:
            if nbrs:
                return f"source node {i} has MEDAG neighbors {sorted(nbrs)}"
            continue
        if not nbrs <= net.in_neighbors(i):
            return f"node {i} lists non-neighbors {sorted(nbrs - net.in_neighbors(i))}"
        if not _triggered(net, nbrs, redundancy):
            return f"node {i} keeps {len(nbrs)} neighbors without redundancy, diversity or trust"

    level = level_partition(medag, regular)
    missing = [i for i in regular if i not in level]
    if missing:
        return f"nodes {missing} have no level in V\\A (cycle or lost ancestry)"
    return None


def _sample_adversary(net: ColoredNetwork, f: FilterLevel, rng: np.random.Generator,
                      attempts: int) -> Optional[FrozenSet[int]]:
    colors = distinct_colors(net)
    for _ in range(attempts):
        color = colors[int(rng.integers(len(colors)))]
        pool = [i for i in net.nodes if net.color(i) == color and not net.is_trusted(i)]
        if not pool:
            continue
        picked = frozenset(i for i in pool if rng.random() < 0.5)
        if not picked:
            continue
        if f == MONO_ONLY or is_f_local(net, picked, int(f)):
            return picked
    return None


def validate_medag(net: ColoredNetwork, medag: Medag, f: FilterLevel,
                   trials: Optional[int] = None, seed: int = 0,
                   adversary_sets: Optional[Iterable[Iterable[int]]] = None) -> MedagValidation:
    """
    Check neighbor-list sufficiency and the level property of V\\A for the
    empty adversary plus `trials` sampled f-local mono-chromatic untrusted
    sets (any size for MONO_ONLY). Explicit `adversary_sets` replace the
    sampled ones.
    """
    if not medag.terminated:
        raise InputError(f"MEDAG for mode {medag.mode} did not terminate; nothing to validate")

    trials = setting('validation', 'medag_trials') if trials is None else trials
    attempts = setting('validation', 'sampling_attempts')

    if adversary_sets is not None:
        candidates = [frozenset()] + [frozenset(A) for A in adversary_sets]
    else:
        rng = substream(seed, "medag-validation", medag.mode)
        candidates = [frozenset()]
        for _ in range(trials):
            A = _sample_adversary(net, f, rng, attempts)
            if A is not None:
                candidates.append(A)

    vacuous = len(candidates) == 1 and trials > 0
    if vacuous:
        logger.warning("[MEDAG] mode %d: no valid adversary set sampled, validated against A = {} only",
                       medag.mode)

    for A in candidates:
        problem = _check_against(net, medag, A)
        if problem:
            logger.info("[MEDAG] mode %d fails for A=%s: %s", medag.mode, sorted(A), problem)
            return MedagValidation(False, vacuous, len(candidates), problem, A)

    return MedagValidation(True, vacuous, len(candidates))


# ============================================================================
# EXPORT
# ============================================================================

def format_medag(medag: Medag) -> str:
    """One `M <j> <i> : <neighbors> @ <round>` line per node"""
    lines = [f"# mode {medag.mode} f={medag.f} terminated={str(medag.terminated).lower()} "
             f"rounds={medag.last_round}"]
    for i in range(medag.node_count):
        nbrs = " ".join(str(n) for n in sorted(medag.neighbors.get(i, ())))
        rnd = medag.activation_round.get(i)
        lines.append(f"M {medag.mode} {i} : {nbrs}{' ' if nbrs else ''}@ {'-' if rnd is None else rnd}")
    return "\n".join(lines) + "\n"


def write_medag_file(medags: Iterable[Medag], path: Union[str, Path]) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w') as f:
        for medag in medags:
            f.write(format_medag(medag))
    return str(path)


if __name__ == "__main__":
    from src.graph_model import complete_network

    k7 = complete_network(7)
    medag = build_medag(k7, {0, 1, 2}, 1)
    print(format_medag(medag), end="")
    print("validation:", validate_medag(k7, medag, 1, trials=10))
