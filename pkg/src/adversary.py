#!/usr/bin/env python3
"""
Adversary Models
Byzantine sets (f-local or mono-chromatic), Sybil replicas and the
transmission strategies compromised nodes use
"""

import itertools
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.errors import ContractViolation, InputError
from src.graph_model import ColoredNetwork, distinct_colors
from src.settings import substream

logger = logging.getLogger(__name__)


class AdversaryModel(str, Enum):
    F_LOCAL = "F_LOCAL"                # at most f adversaries in any outside in-neighborhood
    MONO_CHROMATIC = "MONO_CHROMATIC"  # any number, one color


class StrategyKind(str, Enum):
    SILENT = "SILENT"                  # sends nothing
    CONSTANT = "CONSTANT"              # fixed value
    RANDOM = "RANDOM"                  # true value plus bounded noise
    OPPOSITE_DRIFT = "OPPOSITE_DRIFT"  # -gain * true value
    SPLIT_BRAIN = "SPLIT_BRAIN"        # per-recipient offsets


class ViolationKind(str, Enum):
    UNKNOWN_NODE = "UNKNOWN_NODE"
    TRUST = "TRUST"
    COLOR = "COLOR"
    LOCALITY = "LOCALITY"


@dataclass(frozen=True)
class Strategy:
    kind: StrategyKind = StrategyKind.SILENT
    value: float = 1000.0
    range: float = 100.0
    gain: float = 1.0
    magnitude: float = 50.0
    offsets: Dict[int, float] = field(default_factory=dict)

    def offset_for(self, recipient: int) -> float:
        """SPLIT_BRAIN default: +magnitude to even recipients, -magnitude to odd"""
        if recipient in self.offsets:
            return self.offsets[recipient]
        return self.magnitude if recipient % 2 == 0 else -self.magnitude


@dataclass(frozen=True)
class AdversarySpec:
    members: FrozenSet[int] = frozenset()
    model: AdversaryModel = AdversaryModel.F_LOCAL
    f: Optional[int] = 0
    strategy: Strategy = field(default_factory=Strategy)
    color: Optional[int] = None

    @classmethod
    def none(cls) -> 'AdversarySpec':
        return cls()

    def describe(self) -> Dict:
        return {
            'members': sorted(self.members),
            'model': self.model.value,
            'f': self.f,
            'color': self.color,
            'strategy': self.strategy.kind.value,
        }


@dataclass(frozen=True)
class AdversaryValidation:
    valid: bool
    violation: Optional[ViolationKind] = None
    witness: Optional[int] = None
    detail: str = ""

    def __bool__(self) -> bool:
        return self.valid

    def to_dict(self) -> Dict:
        return {
            'valid': self.valid,
            'violation': self.violation.value if self.violation else None,
            'witness': self.witness,
            'detail': self.detail,
        }


# ============================================================================
# VALIDATION
# ============================================================================

def locality_witness(net: ColoredNetwork, A: Iterable[int], f: int) -> Optional[int]:
    """Lowest node outside A that hears from more than f members of A, if any"""
    members = set(A)
    for node in net.nodes:
        if node not in members and len(net.in_neighbors(node) & members) > f:
            return node
    return None


def is_f_local(net: ColoredNetwork, A: Iterable[int], f: int) -> bool:
    return locality_witness(net, A, f) is None


def validate_adversary(net: ColoredNetwork, spec: AdversarySpec) -> AdversaryValidation:
    """Check trust exclusion, mono-chromaticity and (F_LOCAL) f-locality, in that order"""
    members = sorted(spec.members)

    for node in members:
        if not 0 <= node < net.node_count:
            return AdversaryValidation(False, ViolationKind.UNKNOWN_NODE, node,
                                       f"node {node} is not in the network")

    for node in members:
        if net.is_trusted(node):
            return AdversaryValidation(False, ViolationKind.TRUST, node,
                                       f"trusted node {node} cannot be compromised")

    if members:
        color = spec.color if spec.color is not None else net.color(members[0])
        for node in members:
            if net.color(node) != color:
                return AdversaryValidation(False, ViolationKind.COLOR, node,
                                           f"node {node} has color {net.color(node)}, expected {color}")

    if spec.model == AdversaryModel.F_LOCAL:
        if spec.f is None or spec.f < 0:
            raise InputError(f"F_LOCAL adversary needs a non-negative f, got {spec.f}")
        witness = locality_witness(net, members, spec.f)
        if witness is not None:
            seen = len(net.in_neighbors(witness) & spec.members)
            return AdversaryValidation(False, ViolationKind.LOCALITY, witness,
                                       f"node {witness} hears from {seen} adversaries (f={spec.f})")

    return AdversaryValidation(True)


# ============================================================================
# ENUMERATION
# ============================================================================

def color_class(net: ColoredNetwork, color: int, exclude_trusted: bool = True) -> List[int]:
    return [node for node in net.nodes
            if net.color(node) == color and not (exclude_trusted and net.is_trusted(node))]


def enumerate_flocal_sets(net: ColoredNetwork, f: int, color: int,
                          max_count: Optional[int] = None) -> List[FrozenSet[int]]:
    """
    f-local subsets of the untrusted color class, by increasing size then
    lexicographically. The empty set always comes first.
    """
    candidates = color_class(net, color)
    found: List[FrozenSet[int]] = [frozenset()]

    for size in range(1, len(candidates) + 1):
        if f == 0:
            break
        level = 0
        for subset in itertools.combinations(candidates, size):
            if max_count is not None and len(found) >= max_count:
                return found
            if is_f_local(net, subset, f):
                found.append(frozenset(subset))
                level += 1
        # f-locality is closed under subsets
        if level == 0:
            break

    return found[:max_count] if max_count is not None else found


def resolve_members(net: ColoredNetwork, model: AdversaryModel, f: Optional[int],
                    color: Optional[int], members: Union[str, Sequence[int]],
                    rng: np.random.Generator, max_count: int = 1000) -> Tuple[FrozenSet[int], Optional[int]]:
    """
    Explicit member lists pass through. With 'auto', F_LOCAL picks one
    non-empty enumerated set by seed and MONO_CHROMATIC takes the whole
    untrusted color class. Returns (members, color).
    """
    if not isinstance(members, str):
        chosen = frozenset(int(m) for m in members)
        if color is None and chosen:
            color = net.color(min(chosen))
        return chosen, color

    if members != 'auto':
        raise InputError(f"adversary members must be a list or 'auto', got '{members}'")

    if color is None:
        usable = [c for c in distinct_colors(net) if color_class(net, c)]
        if not usable:
            logger.warning("[ADVERSARY] every node is trusted, no adversary placed")
            return frozenset(), None
        color = int(usable[int(rng.integers(len(usable)))])

    if model == AdversaryModel.MONO_CHROMATIC:
        chosen = frozenset(color_class(net, color))
    else:
        options = [s for s in enumerate_flocal_sets(net, f or 0, color, max_count) if s]
        chosen = options[int(rng.integers(len(options)))] if options else frozenset()

    logger.info("[ADVERSARY] auto-selected %s (color %s, %s)", sorted(chosen), color, model.value)
    return chosen, color


def spoof_expand(net: ColoredNetwork, target: int, replicas: int,
                 strategy: Optional[Strategy] = None) -> Tuple[ColoredNetwork, AdversarySpec]:
    """
    Sybil attack: `replicas` clones of target with its color and its in/out
    neighborhoods. Target and clones form one MONO_CHROMATIC adversary.
    """
    if net.is_trusted(target):
        raise ContractViolation(f"trusted node {target} cannot be spoofed")
    if replicas < 0:
        raise InputError(f"replica count must be non-negative, got {replicas}")

    n = net.node_count
    expanded = ColoredNetwork(n + replicas, net.edges, net.colors, net.trusted)
    sources = net.in_neighbors(target)
    sinks = net.out_neighbors(target)
    for clone in range(n, n + replicas):
        expanded.set_color(clone, net.color(target))
        for j in sources:
            expanded.add_edge(j, clone)
        for i in sinks:
            expanded.add_edge(clone, i)

    spec = AdversarySpec(
        members=frozenset([target, *range(n, n + replicas)]),
        model=AdversaryModel.MONO_CHROMATIC,
        f=None,
        strategy=strategy or Strategy(StrategyKind.OPPOSITE_DRIFT),
        color=net.color(target),
    )
    logger.info("[ADVERSARY] spoofed node %d with %d replicas", target, replicas)
    return expanded, spec


# ============================================================================
# STRATEGIES
# ============================================================================

def transmit(strategy: Strategy, round_k: int, sender: int, recipient: int, mode: int,
             true_value: float, seed: int = 0) -> Optional[float]:
    """
    Value an adversarial sender puts on the (sender -> recipient, mode) link
    in round k; None means nothing is sent. Adversaries know the true state.
    """
    kind = strategy.kind
    if kind == StrategyKind.SILENT:
        return None
    if kind == StrategyKind.CONSTANT:
        return float(strategy.value)
    if kind == StrategyKind.RANDOM:
        rng = substream(seed, "strategy", round_k, sender, recipient, mode)
        return float(true_value + rng.uniform(-strategy.range, strategy.range))
    if kind == StrategyKind.OPPOSITE_DRIFT:
        return float(-strategy.gain * true_value)
    if kind == StrategyKind.SPLIT_BRAIN:
        return float(true_value + strategy.offset_for(recipient))
    raise InputError(f"unknown strategy {kind}")


if __name__ == "__main__":
    from src.graph_model import star_network

    star = star_network(4)
    star.set_color(0, 1)
    print("f-local sets of color 0:", [sorted(s) for s in enumerate_flocal_sets(star, 1, 0)])
    spec = AdversarySpec(frozenset([1, 2]), AdversaryModel.F_LOCAL, 1)
    print("{1, 2} with f=1:", validate_adversary(star, spec).to_dict())
