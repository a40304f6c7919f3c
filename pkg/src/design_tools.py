#!/usr/bin/env python3
"""
Network Design Tools
Trusted-node selection, exhaustive trust/color allocation and the set
cover reductions that generate hard design instances
"""

import itertools
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Tuple, Union

import numpy as np
import yaml

from src.errors import ContractViolation, InputError, PreconditionError, SizeLimitError
from src.graph_model import INFINITY, ColoredNetwork, load_graph_file, reachable_from, write_graph_file
from src.robustness import is_strongly_robust_r
from src.settings import setting
from src.spectral_plant import SystemModel, load_model_file, mode_index_sets, write_model_file

logger = logging.getLogger(__name__)

REDUCTION_EIGENVALUE = 2.0


@dataclass(frozen=True)
class SetCoverInstance:
    """Universe {1..p}, subsets F_1..F_m, budget t (None for 3-DSC)"""
    p: int
    subsets: Tuple[FrozenSet[int], ...]
    t: Optional[int] = None

    def __post_init__(self):
        subsets = tuple(frozenset(int(e) for e in s) for s in self.subsets)
        object.__setattr__(self, 'subsets', subsets)
        if self.p < 1:
            raise InputError(f"universe size must be positive, got {self.p}")
        if not subsets:
            raise InputError("set cover instance needs at least one subset")
        for idx, s in enumerate(subsets, 1):
            stray = sorted(e for e in s if not 1 <= e <= self.p)
            if stray:
                raise InputError(f"F_{idx} has elements {stray} outside 1..{self.p}")
        if self.t is not None and self.t < 0:
            raise InputError(f"budget must be non-negative, got {self.t}")

    @property
    def m(self) -> int:
        return len(self.subsets)

    @property
    def universe(self) -> FrozenSet[int]:
        return frozenset(range(1, self.p + 1))


@dataclass
class DesignProblemInstance:
    """TSRA (budget = t) or CSRA (budget = q) instance"""
    network: ColoredNetwork
    system: SystemModel
    r: Union[int, float]
    budget: int
    kind: str = "TSRA"
    trivially_no: bool = False
    notes: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.r != INFINITY and self.r < 1:
            raise InputError(f"r must be at least 1, got {self.r}")
        if self.budget < 0:
            raise InputError(f"budget must be non-negative, got {self.budget}")

    def source_sets(self) -> Dict[int, FrozenSet[int]]:
        """S_j for every mode in Omega_U"""
        sets = mode_index_sets(self.system, self.network.node_count)
        return {j: sets.sources[j] for j in sets.omega_u}


@dataclass(frozen=True)
class DesignResult:
    answer: bool
    witness: Optional[object] = None

    def __bool__(self) -> bool:
        return self.answer


# ============================================================================
# FAST ACTIVATION
# ============================================================================

class _Percolation:
    """Bitmask activation closure with replaceable trust and colors"""

    def __init__(self, net: ColoredNetwork):
        self.n = net.node_count
        self.full = (1 << self.n) - 1
        self.in_masks = [0] * self.n
        for j, i in net.edges:
            self.in_masks[i] |= 1 << j
        self.colors = [net.color(i) for i in range(self.n)]
        self.trusted = _mask(net.trusted)

    def closure(self, sources: int, trusted: int, r: Optional[Union[int, float]],
                colors: Optional[List[int]] = None, diversity: bool = True) -> int:
        """Active set reached from `sources`; diversity=False drops the three-color trigger"""
        colors = self.colors if colors is None else colors
        active = sources
        while active != self.full:
            woken = 0
            for i in range(self.n):
                if active >> i & 1:
                    continue
                heard = self.in_masks[i] & active
                if not heard:
                    continue
                if heard & trusted or (r is not None and r != INFINITY and heard.bit_count() >= r):
                    woken |= 1 << i
                    continue
                if diversity and len({colors[l] for l in _members(heard)}) >= 3:
                    woken |= 1 << i
            if not woken:
                break
            active |= woken
        return active

    def robust(self, source_masks: Iterable[int], trusted: int, r,
               colors: Optional[List[int]] = None) -> bool:
        return all(s and self.closure(s, trusted, r, colors) == self.full for s in source_masks)


def _mask(nodes: Iterable[int]) -> int:
    out = 0
    for node in nodes:
        out |= 1 << node
    return out


def _members(mask: int) -> Iterator[int]:
    i = 0
    while mask:
        if mask & 1:
            yield i
        mask >>= 1
        i += 1


# ============================================================================
# TRUSTED NODE SELECTION
# ============================================================================

def _check_reachable(net: ColoredNetwork, source_sets: Mapping[int, Iterable[int]]) -> None:
    for j, S in sorted(source_sets.items()):
        reached = reachable_from(net, S)
        missing = sorted(set(net.nodes) - reached)
        if missing:
            raise PreconditionError(f"mode {j}: node {missing[0]} is not reachable from S_{j}",
                                    witness=missing[0])


def greedy_trusted_selection(net: ColoredNetwork, source_sets: Mapping[int, Iterable[int]],
                             r: Union[int, float], use_colors: bool = False) -> FrozenSet[int]:
    """
    Per mode, repeatedly trust the active node whose trust activates the
    most new nodes (lowest id on ties) until the activation reaches every
    node; return the union over modes.

    A node activates on r active in-neighbors or one trusted active
    in-neighbor. use_colors also lets three active colors activate it.
    """
    _check_reachable(net, source_sets)
    perc = _Percolation(net)
    chosen: set = set()

    for j, S in sorted(source_sets.items()):
        sources = _mask(S)
        trusted = perc.trusted
        active = perc.closure(sources, trusted, r, diversity=use_colors)
        picks = []
        while active != perc.full:
            best, gain, best_active = None, 0, active
            for v in _members(active & ~trusted):
                grown = perc.closure(sources, trusted | (1 << v), r, diversity=use_colors)
                delta = (grown & ~active).bit_count()
                if delta > gain:
                    best, gain, best_active = v, delta, grown
            if best is None:
                raise ContractViolation(f"mode {j}: no candidate activates a new node")
            trusted |= 1 << best
            active = best_active
            picks.append(best)
            logger.debug("[GREEDY] mode %d: trust %d (+%d active)", j, best, gain)
        logger.info("[GREEDY] mode %d: %d selection rounds, trusted %s", j, len(picks), picks)
        chosen.update(picks)

    result = frozenset(chosen)
    hardened = net.with_trusted(net.trusted | result)
    for j, S in source_sets.items():
        if not is_strongly_robust_r(hardened, S, r):
            raise ContractViolation(f"greedy trusted set {sorted(result)} leaves mode {j} non-robust")
    return result


def _trusted_sets_of_size(n: int, t: int) -> Iterator[Tuple[int, ...]]:
    return itertools.combinations(range(n), t)


def _tsra_cap(n: int) -> None:
    cap = setting('limits', 'tsra_max_nodes')
    if n > cap:
        raise SizeLimitError("trusted-set enumeration", n, cap)


def minimum_trusted_set(net: ColoredNetwork, source_sets: Mapping[int, Iterable[int]],
                        r: Union[int, float]) -> Optional[FrozenSet[int]]:
    """Smallest extra trusted set giving strong robustness for every mode"""
    _tsra_cap(net.node_count)
    perc = _Percolation(net)
    masks = [_mask(S) for _, S in sorted(source_sets.items())]
    for t in range(net.node_count + 1):
        for combo in _trusted_sets_of_size(net.node_count, t):
            if perc.robust(masks, perc.trusted | _mask(combo), r):
                return frozenset(combo)
    return None


def tsra_bruteforce(instance: DesignProblemInstance) -> DesignResult:
    """Is there a trusted set of exactly `budget` nodes making every mode robust?"""
    net, t = instance.network, instance.budget
    _tsra_cap(net.node_count)
    if t > net.node_count:
        return DesignResult(False)
    perc = _Percolation(net)
    masks = [_mask(S) for _, S in sorted(instance.source_sets().items())]
    for combo in _trusted_sets_of_size(net.node_count, t):
        if perc.robust(masks, perc.trusted | _mask(combo), instance.r):
            return DesignResult(True, frozenset(combo))
    return DesignResult(False)


# ============================================================================
# COLOR ALLOCATION
# ============================================================================

def _restricted_growth(n: int, q: int) -> Iterator[List[int]]:
    """Colorings with at most q colors, one per color permutation class"""
    coloring = [0] * n

    def extend(i: int, used: int) -> Iterator[List[int]]:
        if i == n:
            yield list(coloring)
            return
        for c in range(min(used + 1, q)):
            coloring[i] = c
            yield from extend(i + 1, max(used, c + 1))

    if n == 0:
        yield []
        return
    coloring[0] = 0
    yield from extend(1, 1)


def csra_bruteforce(instance: DesignProblemInstance, q: Optional[int] = None) -> DesignResult:
    """
    Is there a coloring with at most q colors making every mode robust?
    Fewer than 3 colors never satisfy diversity, so one coloring decides it.
    """
    q = instance.budget if q is None else q
    net = instance.network
    cap = setting('limits', 'csra_max_nodes')
    if net.node_count > cap:
        raise SizeLimitError("coloring enumeration", net.node_count, cap)

    perc = _Percolation(net)
    masks = [_mask(S) for _, S in sorted(instance.source_sets().items())]
    if q < 1:
        return DesignResult(False)
    colorings = _restricted_growth(net.node_count, q) if q >= 3 else iter([[0] * net.node_count])
    for coloring in colorings:
        if perc.robust(masks, perc.trusted, instance.r, coloring):
            return DesignResult(True, dict(enumerate(coloring)))
    return DesignResult(False)


def minimum_color_count(instance: DesignProblemInstance, q_max: int = 3) -> Optional[int]:
    """Fewest colors (up to q_max) with a robust allocation, or None"""
    for q in range(1, q_max + 1):
        if csra_bruteforce(instance, q):
            return q
    return None


# ============================================================================
# SET COVER ORACLES AND REDUCTIONS
# ============================================================================

def set_cover_bruteforce(sc: SetCoverInstance) -> DesignResult:
    """Do at most t subsets cover the universe? Witness: 1-based subset indices"""
    if sc.t is None:
        raise InputError("set cover instance has no budget t")
    for size in range(0, min(sc.t, sc.m) + 1):
        for combo in itertools.combinations(range(sc.m), size):
            covered = frozenset().union(*(sc.subsets[i] for i in combo))
            if covered == sc.universe:
                return DesignResult(True, tuple(i + 1 for i in combo))
    return DesignResult(False)


def disjoint_cover3_bruteforce(dsc: SetCoverInstance) -> DesignResult:
    """Can the subsets be split into 3 disjoint families that each cover the universe?"""
    if dsc.m < 3:
        return DesignResult(False)
    for labels in itertools.product(range(3), repeat=dsc.m):
        unions = [set(), set(), set()]
        for subset, label in zip(dsc.subsets, labels):
            unions[label] |= subset
        if all(u == dsc.universe for u in unions):
            return DesignResult(True, labels)
    return DesignResult(False)


def _cover_network(sc: SetCoverInstance) -> Tuple[ColoredNetwork, SystemModel]:
    """u_1..u_p are nodes 0..p-1, f_1..f_m are nodes p..p+m-1; f_j -> u_i iff i in F_j"""
    edges = [(sc.p + j, i - 1) for j, subset in enumerate(sc.subsets) for i in sorted(subset)]
    net = ColoredNetwork(sc.p + sc.m, edges)
    measured = {sc.p + j: [[1.0]] for j in range(sc.m)}
    return net, SystemModel((REDUCTION_EIGENVALUE,), measured, [1.0])


def reduce_sc_to_tsra(sc: SetCoverInstance) -> DesignProblemInstance:
    if sc.t is None:
        raise InputError("set cover instance has no budget t")
    net, model = _cover_network(sc)
    return DesignProblemInstance(net, model, r=sc.m, budget=sc.t, kind="TSRA")


def reduce_3dsc_to_csra(dsc: SetCoverInstance) -> DesignProblemInstance:
    net, model = _cover_network(dsc)
    instance = DesignProblemInstance(net, model, r=dsc.m, budget=3, kind="CSRA",
                                     trivially_no=dsc.m < 3)
    if instance.trivially_no:
        instance.notes['trivially_no'] = f"only {dsc.m} subsets; three disjoint covers need at least 3"
        logger.info("[DESIGN] 3-DSC instance with m=%d flagged trivially no", dsc.m)
    return instance


def csra_answer(instance: DesignProblemInstance) -> bool:
    """CSRA decision honoring the trivially-no flag of reduced instances"""
    return not instance.trivially_no and csra_bruteforce(instance).answer


# ============================================================================
# INSTANCE FILES
# ============================================================================

def parse_set_cover_text(text: str, source: str = "<text>") -> SetCoverInstance:
    """`p <int>`, one `F <elem> ...` line per subset, optional `t <int>`"""
    p, t = None, None
    subsets: List[FrozenSet[int]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        tag, *args = line.split()
        try:
            values = [int(a) for a in args]
        except ValueError:
            raise InputError(f"{source}:{lineno}: non-integer field in '{raw.strip()}'")
        if tag == 'p' and len(values) == 1:
            p = values[0]
        elif tag == 't' and len(values) == 1:
            t = values[0]
        elif tag == 'F':
            subsets.append(frozenset(values))
        else:
            raise InputError(f"{source}:{lineno}: cannot parse '{raw.strip()}'")
    if p is None:
        raise InputError(f"{source}: missing 'p' line")
    return SetCoverInstance(p, tuple(subsets), t)


def load_set_cover_file(path: Union[str, Path]) -> SetCoverInstance:
    path = Path(path)
    with open(path, 'r') as f:
        return parse_set_cover_text(f.read(), str(path))


def write_set_cover_file(sc: SetCoverInstance, path: Union[str, Path]) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"p {sc.p}"] + ["F " + " ".join(str(e) for e in sorted(s)) for s in sc.subsets]
    if sc.t is not None:
        lines.append(f"t {sc.t}")
    with open(path, 'w') as f:
        f.write("\n".join(lines) + "\n")
    return str(path)


def random_set_cover(p: int, m: int, rng: np.random.Generator, t: Optional[int] = None,
                     density: float = 0.5) -> SetCoverInstance:
    """Subsets drawn element-wise; no coverage guarantee so both answers occur"""
    subsets = tuple(frozenset(int(e) + 1 for e in np.flatnonzero(rng.random(p) < density))
                    for _ in range(m))
    return SetCoverInstance(p, subsets, t)


def write_design_instance(instance: DesignProblemInstance, out_dir: Union[str, Path]) -> Dict[str, str]:
    """graph.txt + model.yaml + instance.yaml in out_dir"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {
        'graph': write_graph_file(instance.network, out_dir / "graph.txt"),
        'model': write_model_file(instance.system, out_dir / "model.yaml"),
    }
    meta = {
        'kind': instance.kind,
        'r': instance.r if instance.r != INFINITY else 'INFINITY',
        'budget': instance.budget,
        'trivially_no': instance.trivially_no,
        'sources': {j: sorted(S) for j, S in instance.source_sets().items()},
        'graph': "graph.txt",
        'model': "model.yaml",
    }
    with open(out_dir / "instance.yaml", 'w') as f:
        yaml.safe_dump(meta, f, sort_keys=False)
    files['instance'] = str(out_dir / "instance.yaml")
    return files


def load_design_instance(path: Union[str, Path]) -> DesignProblemInstance:
    """Read an instance.yaml written by write_design_instance"""
    path = Path(path)
    with open(path, 'r') as f:
        meta = yaml.safe_load(f) or {}
    try:
        r = INFINITY if meta['r'] == 'INFINITY' else int(meta['r'])
        net = load_graph_file(path.parent / meta.get('graph', 'graph.txt'))
        model = load_model_file(path.parent / meta.get('model', 'model.yaml'))
        return DesignProblemInstance(net, model, r, int(meta['budget']), meta.get('kind', 'TSRA'),
                                     bool(meta.get('trivially_no', False)))
    except KeyError as e:
        raise InputError(f"{path}: missing key {e}")


if __name__ == "__main__":
    sc = SetCoverInstance(2, (frozenset({1}), frozenset({2})), t=2)
    tsra = reduce_sc_to_tsra(sc)
    print("SC:", set_cover_bruteforce(sc), " TSRA:", tsra_bruteforce(tsra))
    dsc = SetCoverInstance(1, (frozenset({1}),) * 3)
    print("3-DSC:", disjoint_cover3_bruteforce(dsc), " CSRA:", csra_bruteforce(reduce_3dsc_to_csra(dsc)))
