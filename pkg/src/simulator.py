#!/usr/bin/env python3
"""
Experiment Runner
Builds MEDAGs, checks robustness, runs LFRE and writes trace/summary
files for single scenarios and seeded sweeps
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
from joblib import Parallel, delayed

from src.adversary import (AdversaryModel, AdversarySpec, Strategy, StrategyKind, ViolationKind,
                           resolve_members, spoof_expand, validate_adversary)
from src.errors import ConfigurationError, InputError
from src.graph_model import ColoredNetwork, load_graph_file, random_network, reachable_from
from src.lfre import LfreConfig, LfreSimulator, SimResult, Variant
from src.robustness import (MONO_ONLY, FilterLevel, Medag, build_medag, max_redundancy,
                            validate_medag, write_medag_file)
from src.scenario import Scenario
from src.settings import output_directory, setting, substream
from src.spectral_plant import SystemModel, load_model_file, mode_index_sets, model_from_sources
from src.trace_export import CSVExporter, ExcelExporter, write_summary

logger = logging.getLogger(__name__)


@dataclass
class RunOutcome:
    result: SimResult
    summary: Dict[str, Any]
    medags: Dict[int, Medag]
    files: Dict[str, str] = field(default_factory=dict)


def _robust_for(net: ColoredNetwork, sources: Dict[int, frozenset], level: FilterLevel) -> Dict[int, Medag]:
    return {j: build_medag(net, S, level, mode=j) for j, S in sorted(sources.items())}


def choose_filter_level(net: ColoredNetwork, sources: Dict[int, frozenset], variant: Variant,
                        f: int) -> tuple:
    """
    MEDAGs for the configured filter, or, when the network is not robust
    for f, for the largest f' < f that still terminates everywhere (0 if
    none). Returns (robust, filter level, medags).
    """
    level: FilterLevel = MONO_ONLY if variant == Variant.MONO_CHROMATIC else f
    medags = _robust_for(net, sources, level)
    failing = [j for j, m in medags.items() if not m.terminated]
    if not failing:
        return True, level, medags
    logger.warning("[SCENARIO] robustness precondition violated for modes %s (f=%s)", failing, level)
    if variant == Variant.MONO_CHROMATIC:
        return False, level, medags

    for lower in range(f - 1, -1, -1):
        candidate = _robust_for(net, sources, lower)
        if all(m.terminated for m in candidate.values()):
            logger.warning("[SCENARIO] not robust for f=%d; filtering with f=%d", f, lower)
            return False, lower, candidate
    logger.warning("[SCENARIO] not robust even for f=0; unreached nodes run open-loop")
    return False, 0, _robust_for(net, sources, 0)


def simulate_network(net: ColoredNetwork, model: SystemModel, adversary: AdversarySpec,
                     variant: Variant = Variant.F_LOCAL, f: int = 1, seed: int = 0,
                     horizon: Optional[int] = None, threshold: Optional[float] = None,
                     divergence_limit: Optional[float] = None, observer_pole: Optional[float] = None,
                     validation_trials: int = 0, record_rows: bool = True,
                     name: str = "scenario") -> RunOutcome:
    """Full pipeline on in-memory inputs; nothing is written"""
    horizon = setting('simulation', 'horizon') if horizon is None else horizon
    threshold = setting('simulation', 'threshold') if threshold is None else threshold
    divergence_limit = setting('simulation', 'divergence_limit') if divergence_limit is None else divergence_limit

    validation = validate_adversary(net, adversary)
    if not validation.valid:
        if validation.violation in (ViolationKind.TRUST, ViolationKind.UNKNOWN_NODE):
            raise ConfigurationError(f"adversary rejected: {validation.detail}")
        logger.warning("[ADVERSARY] %s", validation.detail)

    sets = mode_index_sets(model, net.node_count)
    sources = {j: sets.sources[j] for j in sets.omega_u}
    robust, level, medags = choose_filter_level(net, sources, variant, f)

    robust_check = {}
    for j, medag in medags.items():
        check = {'terminated': medag.terminated, 'rounds': medag.last_round,
                 'sources': sorted(sources[j])}
        if validation_trials and medag.terminated:
            report = validate_medag(net, medag, level, validation_trials, seed)
            check['validated'] = report.passed
            check['validation_vacuous'] = report.vacuous
        robust_check[str(j)] = check

    filter_f = level if level != MONO_ONLY else None
    config = LfreConfig(variant, filter_f if filter_f is not None else 0, observer_pole=observer_pole)
    sim = LfreSimulator(net, model, medags, adversary, config, seed, record_rows=record_rows)
    result = sim.run(horizon, threshold, divergence_limit)

    summary = {
        'scenario': name,
        'verdict': result.verdict.value,
        'robust': robust,
        'robust_check': robust_check,
        'configured_f': f if variant == Variant.F_LOCAL else None,
        'filter_f': filter_f,
        'variant': variant.value,
        'steps': result.steps,
        'steps_to_threshold': result.steps_to_threshold,
        'final_max_error': result.final_max_error,
        'safety_violations': result.safety_violations,
        'safety_checks': result.safety_checks,
        'rules': sim.rule_counts(),
        'adversary': {**adversary.describe(), 'validation': validation.to_dict()},
        'seed': seed,
    }
    return RunOutcome(result, summary, medags)


def _adversary_from_scenario(scenario: Scenario, net: ColoredNetwork) -> tuple:
    section = scenario.adversary
    strategy = section.strategy.to_strategy()
    if section.spoof is not None:
        net, spec = spoof_expand(net, section.spoof.target, section.spoof.replicas, strategy)
        return net, spec

    rng = substream(scenario.seed, "adversary")
    members, color = resolve_members(net, section.model, section.f, section.color, section.members, rng)
    spec = AdversarySpec(members, section.model,
                         section.f if section.model == AdversaryModel.F_LOCAL else None,
                         strategy, color)
    return net, spec


def run_scenario(scenario: Scenario, out_dir: Union[str, Path, None] = None,
                 write: bool = True) -> RunOutcome:
    """Load inputs, simulate, and write trace.csv / summary.json / medag file"""
    net = load_graph_file(scenario.network_path)
    model = load_model_file(scenario.model_path)
    if model.max_node() >= net.node_count:
        raise InputError(f"model measures node {model.max_node()} but {scenario.network} "
                         f"has {net.node_count} nodes")

    net, adversary = _adversary_from_scenario(scenario, net)
    outcome = simulate_network(
        net, model, adversary,
        variant=scenario.lfre.variant,
        f=scenario.lfre.f,
        seed=scenario.seed,
        horizon=scenario.horizon,
        threshold=scenario.threshold,
        divergence_limit=scenario.divergence_limit,
        observer_pole=scenario.lfre.observer_pole,
        validation_trials=scenario.lfre.medag_validation_trials,
        name=scenario.name,
    )
    if not write:
        return outcome

    if out_dir is None:
        out_dir = scenario.resolve(scenario.output.directory) if scenario.output.directory \
            else output_directory() / scenario.name
    out_dir = Path(out_dir)
    files = outcome.files
    files['trace'] = CSVExporter.save_to_file(CSVExporter.export_trace(outcome.result.trace),
                                              out_dir / scenario.output.trace)
    files['summary'] = write_summary(outcome.summary, out_dir / scenario.output.summary)
    if scenario.output.medag:
        files['medag'] = write_medag_file(outcome.medags.values(), out_dir / scenario.output.medag)
    if scenario.output.workbook:
        files['workbook'] = ExcelExporter().export_run(outcome.summary, outcome.result.trace,
                                                       out_dir / scenario.output.workbook)
    logger.info("[SCENARIO] '%s' %s; outputs in %s", scenario.name, outcome.summary['verdict'], out_dir)
    return outcome


# ============================================================================
# SWEEPS
# ============================================================================

SWEEP_COLUMNS = ['seed', 'nodes', 'modes', 'sources', 'trusted', 'margin', 'adversary', 'strategy',
                 'verdict', 'steps', 'steps_to_threshold', 'final_max_error', 'safety_violations']

SWEEP_STRATEGIES = [
    Strategy(StrategyKind.SILENT),
    Strategy(StrategyKind.CONSTANT, value=1000.0),
    Strategy(StrategyKind.RANDOM, range=100.0),
    Strategy(StrategyKind.OPPOSITE_DRIFT, gain=1.0),
    Strategy(StrategyKind.SPLIT_BRAIN, magnitude=50.0),
]


def generate_robust_case(seed: int, f: int = 1, n_range: Sequence[int] = (7, 10),
                         n_modes: int = 2, attempts: int = 50) -> tuple:
    """
    Random colored network and diagonal model that are strongly robust
    for filter level f w.r.t. every unstable mode's sources.
    """
    rng = substream(seed, "sweep-instance")
    for _ in range(attempts):
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        net = random_network(n, float(rng.choice([0.5, 0.6, 0.7])), int(rng.integers(1, 4)),
                             float(rng.choice([0.0, 0.1])), rng)
        unstable = [float(v) for v in rng.uniform(1.05, 1.5, size=n_modes)]
        stable = [float(rng.uniform(-0.5, 0.5))]
        sources = {}
        for j in range(n_modes):
            count = int(rng.integers(2 * f + 1, min(n, 2 * f + 3) + 1))
            sources[j] = sorted(int(v) for v in rng.choice(n, size=count, replace=False))
        sources[n_modes] = sorted(int(v) for v in rng.choice(n, size=2, replace=False))
        if any(len(reachable_from(net, S)) < n for S in sources.values()):
            continue
        model = model_from_sources(unstable + stable, sources, rng.uniform(-1.0, 1.0, size=n_modes + 1))
        sets = mode_index_sets(model, n)
        if all(build_medag(net, sets.sources[j], f).terminated for j in sets.omega_u):
            return net, model
    raise InputError(f"seed {seed}: no robust instance found in {attempts} attempts")


def generate_mono_case(seed: int, n_range: Sequence[int] = (7, 10), n_modes: int = 2,
                       attempts: int = 50) -> tuple:
    """
    Random three-color network and diagonal model that are strongly
    robust with the count trigger disabled: every node is reached through
    trust or three distinct colors, so a whole color class may be compromised.
    """
    rng = substream(seed, "mono-instance")
    for _ in range(attempts):
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        net = random_network(n, float(rng.choice([0.7, 0.8, 0.9])), 3,
                             float(rng.choice([0.0, 0.1])), rng)
        by_color = {c: [i for i in net.nodes if net.color(i) == c] for c in range(3)}
        if any(not nodes for nodes in by_color.values()):
            continue
        unstable = [float(v) for v in rng.uniform(1.05, 1.5, size=n_modes)]
        stable = [float(rng.uniform(-0.5, 0.5))]
        sources = {}
        for j in range(n_modes):
            picks = {int(rng.choice(nodes)) for nodes in by_color.values()}
            extra = int(rng.integers(0, 3))
            picks.update(int(v) for v in rng.choice(n, size=extra, replace=False))
            sources[j] = sorted(picks)
        sources[n_modes] = sorted(int(v) for v in rng.choice(n, size=2, replace=False))
        if any(len(reachable_from(net, S)) < n for S in sources.values()):
            continue
        model = model_from_sources(unstable + stable, sources, rng.uniform(-1.0, 1.0, size=n_modes + 1))
        sets = mode_index_sets(model, n)
        if all(build_medag(net, sets.sources[j], MONO_ONLY).terminated for j in sets.omega_u):
            return net, model
    raise InputError(f"seed {seed}: no mono-chromatic robust instance found in {attempts} attempts")


def run_sweep_case(seed: int, f: int = 1, horizon: Optional[int] = None,
                   threshold: Optional[float] = None, mono: bool = False) -> Dict[str, Any]:
    """One generated case; mono compromises a whole color class of a MONO-robust network"""
    rng = substream(seed, "sweep-adversary")
    strategy = SWEEP_STRATEGIES[seed % len(SWEEP_STRATEGIES)]
    if mono:
        net, model = generate_mono_case(seed)
        members, color = resolve_members(net, AdversaryModel.MONO_CHROMATIC, None, None, 'auto', rng)
        adversary = AdversarySpec(members, AdversaryModel.MONO_CHROMATIC, None, strategy, color)
        variant = Variant.MONO_CHROMATIC
    else:
        net, model = generate_robust_case(seed, f)
        members, color = resolve_members(net, AdversaryModel.F_LOCAL, f, None, 'auto', rng)
        adversary = AdversarySpec(members, AdversaryModel.F_LOCAL, f, strategy, color)
        variant = Variant.F_LOCAL
    outcome = simulate_network(net, model, adversary, variant, f, seed,
                               horizon, threshold, record_rows=False, name=f"sweep-{seed}")
    sets = mode_index_sets(model, net.node_count)
    margin = min((max_redundancy(net, sets.sources[j]) for j in sets.omega_u), default=0)
    s = outcome.summary
    return {
        'seed': seed,
        'nodes': net.node_count,
        'modes': model.n,
        'sources': "; ".join(f"{j}:{' '.join(map(str, sorted(sets.sources[j])))}" for j in sets.omega_u),
        'trusted': " ".join(map(str, sorted(net.trusted))),
        'margin': margin,
        'adversary': " ".join(map(str, sorted(members))),
        'strategy': strategy.kind.value,
        'verdict': s['verdict'],
        'steps': s['steps'],
        'steps_to_threshold': s['steps_to_threshold'],
        'final_max_error': s['final_max_error'],
        'safety_violations': s['safety_violations'],
    }


def aggregate_sweep(rows: List[Dict[str, Any]]) -> Dict[str, Any]:
    reached = [r['steps_to_threshold'] for r in rows if r['steps_to_threshold'] is not None]
    return {
        'count': len(rows),
        'converged': sum(r['verdict'] == 'CONVERGED' for r in rows),
        'converged_fraction': (sum(r['verdict'] == 'CONVERGED' for r in rows) / len(rows)) if rows else 0.0,
        'mean_steps_to_threshold': float(np.mean(reached)) if reached else None,
        'max_steps_to_threshold': int(max(reached)) if reached else None,
        'safety_violations': sum(r['safety_violations'] for r in rows),
    }


def sweep(seed_start: int, count: int, f: int = 1, jobs: int = 1,
          out_dir: Union[str, Path, None] = None, workbook: bool = False,
          mono: bool = False) -> Dict[str, Any]:
    """Run `count` generated robust scenarios; rows come back in seed order"""
    seeds = list(range(seed_start, seed_start + count))
    logger.info("[SWEEP] %d %s cases from seed %d with %d jobs", count,
                "mono-chromatic" if mono else "f-local", seed_start, jobs)
    rows = Parallel(n_jobs=jobs)(delayed(run_sweep_case)(s, f, mono=mono) for s in seeds)
    aggregate = aggregate_sweep(rows)

    if out_dir is not None:
        out_dir = Path(out_dir)
        aggregate_files = {
            'runs': CSVExporter.save_to_file(CSVExporter.export_rows(SWEEP_COLUMNS, rows),
                                             out_dir / "sweep.csv"),
            'summary': write_summary(aggregate, out_dir / "sweep_summary.json"),
        }
        if workbook:
            aggregate_files['workbook'] = ExcelExporter().export_sweep(aggregate, SWEEP_COLUMNS, rows,
                                                                       out_dir / "sweep.xlsx")
        logger.info("[SWEEP] wrote %s", ", ".join(aggregate_files.values()))
    return {'aggregate': aggregate, 'rows': rows}
