#!/usr/bin/env python3
"""
Local-Filtering Resilient Estimation
Per-mode update rules (trusted, diversity, trimmed) driven by MEDAG
neighbor lists, and the synchronous-round simulator that runs them
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Tuple

import numpy as np

from src.adversary import AdversarySpec, transmit
from src.errors import ConfigurationError, ContractViolation, InputError, ProtocolError
from src.graph_model import ColoredNetwork
from src.robustness import Medag
from src.settings import setting
from src.spectral_plant import LocalObserver, SystemModel, mode_index_sets, step_plant

logger = logging.getLogger(__name__)


class Variant(str, Enum):
    F_LOCAL = "F_LOCAL"
    MONO_CHROMATIC = "MONO_CHROMATIC"


class Rule(str, Enum):
    OBSERVER = "OBSERVER"
    TRUSTED = "TRUSTED"
    DIVERSITY = "DIVERSITY"
    TRIMMED = "TRIMMED"
    OPEN_LOOP = "OPEN_LOOP"


class Verdict(str, Enum):
    CONVERGED = "CONVERGED"
    DIVERGED = "DIVERGED"
    MAXSTEPS = "MAXSTEPS"


@dataclass(frozen=True)
class LfreConfig:
    variant: Variant = Variant.F_LOCAL
    f: int = 0
    weight_scheme: str = "UNIFORM"
    sort_tiebreak: str = "BY_NODE_ID"
    observer_pole: Optional[float] = None

    def __post_init__(self):
        if self.weight_scheme != "UNIFORM":
            raise InputError(f"unsupported weight scheme '{self.weight_scheme}'")
        if self.sort_tiebreak != "BY_NODE_ID":
            raise InputError(f"unsupported sort tiebreak '{self.sort_tiebreak}'")
        if self.variant == Variant.F_LOCAL and (self.f is None or self.f < 0):
            raise InputError(f"F_LOCAL needs a non-negative f, got {self.f}")


# ============================================================================
# UPDATE RULES
# ============================================================================

def _uniform_average(values: List[float]) -> float:
    if not values:
        raise ContractViolation("convex combination over an empty set")
    weights = np.full(len(values), 1.0 / len(values))
    if np.any(weights < 0) or not math.isclose(float(weights.sum()), 1.0, rel_tol=1e-12):
        raise ContractViolation("update weights are not convex")
    # shift by the first value so equal inputs average to themselves exactly
    vals = np.asarray(values, dtype=float)
    return float(vals[0] + weights @ (vals - vals[0]))


def sort_senders(estimates_from: Mapping[int, float]) -> List[int]:
    """Senders by estimate descending, ties by node id ascending"""
    return sorted(estimates_from, key=lambda node: (-estimates_from[node], node))


def diversity_retained(estimates_from: Mapping[int, float], colors: Mapping[int, int]) -> List[int]:
    """
    Drop the run of senders sharing the top sender's color from the top and
    the run sharing the bottom sender's color from the bottom.
    """
    missing = [node for node in estimates_from if node not in colors]
    if missing:
        raise InputError(f"no color known for senders {sorted(missing)}")
    if len({colors[node] for node in estimates_from}) < 3:
        raise ContractViolation("diversity rule needs senders of at least 3 distinct colors")

    order = sort_senders(estimates_from)
    top, bottom = colors[order[0]], colors[order[-1]]
    m = next(p for p, node in enumerate(order) if colors[node] != top)
    M = max(p for p, node in enumerate(order) if colors[node] != bottom)
    return order[m:M + 1]


def trimmed_retained(estimates_from: Mapping[int, float], f: int) -> List[int]:
    """Drop the f highest and f lowest senders"""
    if len(estimates_from) < 2 * f + 1:
        raise ProtocolError(f"trimmed rule needs at least {2 * f + 1} senders, got {len(estimates_from)}")
    order = sort_senders(estimates_from)
    return order[f:len(order) - f]


def lfre_step_trusted(estimates_from: Mapping[int, float], trusted_neighbors: Iterable[int],
                      lam: float) -> float:
    trusted = sorted(trusted_neighbors)
    if not trusted:
        raise ContractViolation("trusted rule needs at least one trusted neighbor")
    missing = [node for node in trusted if node not in estimates_from]
    if missing:
        raise ProtocolError(f"no estimate from trusted neighbors {missing}")
    return lam * _uniform_average([estimates_from[node] for node in trusted])


def lfre_step_diversity(estimates_from: Mapping[int, float], colors: Mapping[int, int],
                        lam: float) -> float:
    kept = diversity_retained(estimates_from, colors)
    return lam * _uniform_average([estimates_from[node] for node in kept])


def lfre_step_trimmed(estimates_from: Mapping[int, float], f: int, lam: float) -> float:
    kept = trimmed_retained(estimates_from, f)
    return lam * _uniform_average([estimates_from[node] for node in kept])


# ============================================================================
# SIMULATION STATE AND TRACE
# ============================================================================

@dataclass
class LfreState:
    k: int
    x: np.ndarray
    estimates: np.ndarray  # (N, n); rows of adversarial nodes are unused


@dataclass(frozen=True)
class TraceRow:
    k: int
    node: int
    mode: int
    estimate: float
    error: float
    rule: str


@dataclass
class SimTrace:
    rows: List[TraceRow] = field(default_factory=list)
    states: List[List[float]] = field(default_factory=list)
    max_errors: List[float] = field(default_factory=list)


@dataclass
class SimResult:
    verdict: Verdict
    steps: int
    steps_to_threshold: Optional[int]
    final_max_error: float
    safety_violations: int
    safety_checks: int
    trace: SimTrace


class LfreSimulator:
    """
    Runs plant, local observers and LFRE filtering in lock-step rounds.

    Rules are fixed per (node, mode) by the frozen MEDAG neighbor lists:
    modes the node detects use its observer, the rest use the first of
    trusted, diversity, trimmed that the neighbor list supports. Nodes a
    MEDAG never reached roll their estimate forward open-loop.
    """

    def __init__(self, net: ColoredNetwork, model: SystemModel, medags: Mapping[int, Medag],
                 adversary: Optional[AdversarySpec] = None, config: Optional[LfreConfig] = None,
                 seed: int = 0, state: Optional[LfreState] = None, record_rows: bool = True):
        self.net = net
        self.model = model
        self.medags = dict(medags)
        self.adversary = adversary or AdversarySpec.none()
        self.config = config or LfreConfig()
        self.seed = seed
        self.record_rows = record_rows

        n_nodes, n = net.node_count, model.n
        self.index_sets = mode_index_sets(model, n_nodes)
        self.regular = [i for i in net.nodes if i not in self.adversary.members]
        self.lams = np.asarray(model.eigenvalues)
        self.colors = net.colors
        self.observers = {i: LocalObserver(model, i, self.config.observer_pole) for i in self.regular}

        self.plan: Dict[Tuple[int, int], Rule] = {}
        self.informants: Dict[Tuple[int, int], List[int]] = {}
        for i in self.regular:
            for j in range(n):
                self.plan[(i, j)] = self._choose_rule(i, j)

        if state is None:
            state = LfreState(0, model.initial_state.copy(), np.zeros((n_nodes, n)))
        if state.estimates.shape != (n_nodes, n) or state.x.shape != (n,):
            raise InputError(f"state shapes {state.estimates.shape}/{state.x.shape} do not match "
                             f"({n_nodes}, {n})/({n},)")
        self.state = LfreState(state.k, np.array(state.x, dtype=float),
                               np.array(state.estimates, dtype=float))

        self.trace = SimTrace()
        self.safety_violations = 0
        self.safety_checks = 0
        self._record()

    def _choose_rule(self, i: int, j: int) -> Rule:
        if j in self.index_sets.detectable[i]:
            return Rule.OBSERVER
        medag = self.medags.get(j)
        if medag is None or not medag.is_activated(i) or not medag.neighbors.get(i):
            return Rule.OPEN_LOOP

        nbrs = sorted(medag.neighbors[i])
        self.informants[(i, j)] = nbrs
        if any(self.net.is_trusted(l) for l in nbrs):
            return Rule.TRUSTED
        if len({self.colors[l] for l in nbrs}) >= 3:
            return Rule.DIVERSITY
        return Rule.TRIMMED

    # ------------------------------------------------------------------
    # Rounds
    # ------------------------------------------------------------------

    def rule_counts(self) -> Dict[str, int]:
        counts: Dict[str, int] = {}
        for rule in self.plan.values():
            counts[rule.value] = counts.get(rule.value, 0) + 1
        return counts

    def _messages(self, i: int, j: int) -> Dict[int, float]:
        """Values node i holds for mode j from its MEDAG neighbors this round"""
        k, x, est = self.state.k, self.state.x, self.state.estimates
        received: Dict[int, float] = {}
        for l in self.informants[(i, j)]:
            if l in self.adversary.members:
                value = transmit(self.adversary.strategy, k, l, i, j, float(x[j]), self.seed)
                # silence is replaced by the receiver's own estimate
                received[l] = float(est[i, j]) if value is None else value
            else:
                received[l] = float(est[l, j])
        return received

    def _audit(self, received: Dict[int, float], kept: List[int]) -> None:
        honest = [v for l, v in received.items() if l not in self.adversary.members]
        if not honest:
            return
        lo, hi = min(honest), max(honest)
        self.safety_checks += 1
        for l in kept:
            if not lo <= received[l] <= hi:
                self.safety_violations += 1
                logger.debug("[LFRE] k=%d retained value %.6g from %d outside [%.6g, %.6g]",
                             self.state.k, received[l], l, lo, hi)

    def _filter(self, i: int, j: int, rule: Rule) -> float:
        received = self._messages(i, j)
        lam = float(self.lams[j])
        if rule == Rule.TRUSTED:
            trusted = [l for l in received if self.net.is_trusted(l)]
            return lfre_step_trusted(received, trusted, lam)
        if rule == Rule.DIVERSITY:
            kept = diversity_retained(received, self.colors)
        else:
            if self.config.variant == Variant.MONO_CHROMATIC:
                raise ConfigurationError(
                    f"node {i} mode {j}: MONO_CHROMATIC filtering reached the trimmed rule; "
                    "the network is not robust to unbounded mono-chromatic adversaries")
            kept = trimmed_retained(received, self.config.f)
        self._audit(received, kept)
        return lam * _uniform_average([received[l] for l in kept])

    def step(self) -> LfreState:
        """Advance one synchronous round k -> k+1"""
        k, x, est = self.state.k, self.state.x, self.state.estimates
        nxt = est.copy()

        for i in self.regular:
            observer = self.observers[i]
            if observer.detectable:
                y_i = self.model.measure(i, x)
                local = observer.step({j: float(est[i, j]) for j in observer.detectable}, y_i)
                for j, value in local.items():
                    nxt[i, j] = value
            for j in self.index_sets.undetectable[i]:
                rule = self.plan[(i, j)]
                if rule == Rule.OPEN_LOOP:
                    nxt[i, j] = self.lams[j] * est[i, j]
                else:
                    nxt[i, j] = self._filter(i, j, rule)

        self.state = LfreState(k + 1, step_plant(self.model, x), nxt)
        self._record()
        return self.state

    def errors(self) -> np.ndarray:
        """|estimate - true value| for regular nodes, shape (|R|, n)"""
        if not self.regular:
            return np.zeros((0, self.model.n))
        return np.abs(self.state.estimates[self.regular] - self.state.x)

    def max_error(self) -> float:
        errs = self.errors()
        if errs.size == 0:
            return 0.0
        if not np.all(np.isfinite(errs)):
            return math.inf
        return float(errs.max())

    def _record(self) -> None:
        k, x, est = self.state.k, self.state.x, self.state.estimates
        self.trace.states.append(x.tolist())
        self.trace.max_errors.append(self.max_error())
        if not self.record_rows:
            return
        for i in self.regular:
            for j in range(self.model.n):
                self.trace.rows.append(TraceRow(k, i, j, float(est[i, j]),
                                                abs(float(est[i, j]) - float(x[j])),
                                                self.plan[(i, j)].value))

    def run(self, horizon: Optional[int] = None, threshold: Optional[float] = None,
            divergence_limit: Optional[float] = None) -> SimResult:
        """
        Step until the max regular error drops below threshold (CONVERGED),
        exceeds divergence_limit (DIVERGED) or the horizon is reached.
        """
        horizon = setting('simulation', 'horizon') if horizon is None else horizon
        threshold = setting('simulation', 'threshold') if threshold is None else threshold
        limit = setting('simulation', 'divergence_limit') if divergence_limit is None else divergence_limit

        verdict = Verdict.MAXSTEPS
        reached: Optional[int] = None
        while True:
            err = self.max_error()
            if err < threshold:
                verdict, reached = Verdict.CONVERGED, self.state.k
                break
            if err > limit:
                verdict = Verdict.DIVERGED
                break
            if self.state.k >= horizon:
                break
            self.step()

        logger.info("[LFRE] %s after %d steps (max error %.3e, %d safety violations)",
                    verdict.value, self.state.k, self.max_error(), self.safety_violations)
        return SimResult(verdict, self.state.k, reached, self.max_error(),
                         self.safety_violations, self.safety_checks, self.trace)


def lfre_round(net: ColoredNetwork, medags: Mapping[int, Medag], model: SystemModel,
               state: LfreState, adversary: Optional[AdversarySpec] = None,
               config: Optional[LfreConfig] = None, seed: int = 0) -> Tuple[LfreState, List[TraceRow]]:
    """One round from an explicit state; returns the next state and its trace rows"""
    sim = LfreSimulator(net, model, medags, adversary, config, seed, state)
    sim.trace = SimTrace()
    sim.step()
    return sim.state, sim.trace.rows


if __name__ == "__main__":
    from src.graph_model import complete_network
    from src.robustness import build_medag
    from src.spectral_plant import model_from_sources

    net = complete_network(7)
    model = model_from_sources([1.5], {0: [0, 1, 2]}, [1.0])
    medags = {0: build_medag(net, {0, 1, 2}, 1)}
    result = LfreSimulator(net, model, medags, config=LfreConfig(f=1)).run()
    print(result.verdict.value, result.steps, f"{result.final_max_error:.2e}")
