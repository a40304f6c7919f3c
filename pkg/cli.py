#!/usr/bin/env python3
"""
Resilient Estimation CLI
Robustness checks, MEDAG export, LFRE simulations, design tools and sweeps
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, FrozenSet, List, Optional

from src.design_tools import (DesignProblemInstance, csra_answer, csra_bruteforce,
                              disjoint_cover3_bruteforce, greedy_trusted_selection,
                              load_set_cover_file, minimum_color_count, minimum_trusted_set,
                              reduce_3dsc_to_csra, reduce_sc_to_tsra, set_cover_bruteforce,
                              tsra_bruteforce, write_design_instance)
from src.errors import InputError, ResilientEstimationError
from src.graph_model import (INFINITY, ColoredNetwork, ReachabilityParams,
                             is_strongly_robust_bruteforce, load_graph_file)
from src.robustness import MONO_ONLY, build_medag, format_medag, is_strongly_robust_r, write_medag_file
from src.scenario import load_scenario
from src.settings import output_directory, setting, use_config
from src.simulator import run_scenario, sweep
from src.spectral_plant import load_model_file, mode_index_sets

logger = logging.getLogger("cli")


def _parse_nodes(text: str) -> FrozenSet[int]:
    try:
        return frozenset(int(v) for v in text.split(',') if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated node ids, got '{text}'")


def _parse_r(text: str):
    if text.lower() in ('inf', 'infinity'):
        return INFINITY
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"r must be an integer or 'inf', got '{text}'")


def _source_sets(net: ColoredNetwork, args) -> Dict[int, FrozenSet[int]]:
    """Per-mode S_j from --model, or a single set from --sources"""
    if getattr(args, 'model', None):
        model = load_model_file(args.model)
        sets = mode_index_sets(model, net.node_count)
        return {j: sets.sources[j] for j in sets.omega_u}
    if getattr(args, 'sources', None) is not None:
        return {0: args.sources}
    raise InputError("either --model or --sources is required")


def _filter_level(args):
    return MONO_ONLY if args.mono else args.f


# ===== SUBCOMMANDS =====

def cmd_check_robust(args) -> int:
    net = load_graph_file(args.graph)
    if args.r is not None:
        params = ReachabilityParams(args.r)
    else:
        params = ReachabilityParams(INFINITY if args.mono else 2 * args.f + 1)

    all_ok = True
    for j, S in sorted(_source_sets(net, args).items()):
        robust = is_strongly_robust_r(net, S, params.r)
        line = f"mode {j}: {'YES' if robust else 'NO'}"
        if not robust and net.node_count <= setting('limits', 'bruteforce_max_nodes'):
            witness = is_strongly_robust_bruteforce(net, S, params).counterexample
            line += f" counterexample {{{', '.join(map(str, sorted(witness or [])))}}}"
        print(line)
        all_ok = all_ok and robust
    print("ROBUST" if all_ok else "NOT ROBUST")
    return 0


def cmd_build_medag(args) -> int:
    net = load_graph_file(args.graph)
    level = _filter_level(args)
    medags = [build_medag(net, S, level, mode=j) for j, S in sorted(_source_sets(net, args).items())]
    if args.out:
        print(f"MEDAG written to {write_medag_file(medags, args.out)}")
    else:
        for medag in medags:
            print(format_medag(medag), end="")
    for medag in medags:
        if not medag.terminated:
            logger.warning("[MEDAG] mode %d did not terminate; unactivated nodes %s",
                           medag.mode, medag.unactivated())
    return 0


def cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    outcome = run_scenario(scenario, args.out_dir)
    s = outcome.summary
    print(f"{s['verdict']} after {s['steps']} steps, max error {s['final_max_error']:.3e}, "
          f"robust={str(s['robust']).lower()}, safety violations {s['safety_violations']}")
    for label, path in sorted(outcome.files.items()):
        print(f"  {label}: {path}")
    return 0


def cmd_design_trust(args) -> int:
    net = load_graph_file(args.graph)
    sources = _source_sets(net, args)
    trusted = greedy_trusted_selection(net, sources, args.r, use_colors=args.use_colors)
    print(f"greedy trusted set ({len(trusted)}): {sorted(trusted)}")
    if args.exact:
        best = minimum_trusted_set(net, sources, args.r)
        print(f"minimum trusted set ({len(best)}): {sorted(best)}" if best is not None
              else "no trusted set achieves robustness")
    return 0


def cmd_design_colors(args) -> int:
    net = load_graph_file(args.graph)
    model = load_model_file(args.model)
    instance = DesignProblemInstance(net.with_trusted([]), model, args.r, args.q, kind="CSRA")
    if args.min_colors:
        q = minimum_color_count(instance, args.q)
        print(f"minimum colors: {q}" if q is not None else f"no allocation with at most {args.q} colors")
        return 0
    result = csra_bruteforce(instance)
    print("YES" if result else "NO")
    if result.witness is not None:
        print("coloring: " + " ".join(f"{i}:{c}" for i, c in sorted(result.witness.items())))
    return 0


def cmd_reduce(args) -> int:
    source = load_set_cover_file(args.input)
    out_dir = Path(args.out_dir)
    if args.problem == 'sc':
        instance = reduce_sc_to_tsra(source)
        files = write_design_instance(instance, out_dir)
        print(f"TSRA instance: {instance.network.node_count} nodes, r={instance.r}, t={instance.budget}")
        if args.solve:
            print(f"SC answer: {'YES' if set_cover_bruteforce(source) else 'NO'}; "
                  f"TSRA answer: {'YES' if tsra_bruteforce(instance) else 'NO'}")
    else:
        instance = reduce_3dsc_to_csra(source)
        files = write_design_instance(instance, out_dir)
        flag = " (trivially no)" if instance.trivially_no else ""
        print(f"3-CSRA instance: {instance.network.node_count} nodes, r={instance.r}{flag}")
        if args.solve:
            print(f"3-DSC answer: {'YES' if disjoint_cover3_bruteforce(source) else 'NO'}; "
                  f"CSRA answer: {'YES' if csra_answer(instance) else 'NO'}")
    for label, path in files.items():
        print(f"  {label}: {path}")
    return 0


def cmd_sweep(args) -> int:
    out_dir = Path(args.out_dir) if args.out_dir else output_directory() / "sweep"
    report = sweep(args.seed_start, args.count, args.f, args.jobs, out_dir, args.workbook, args.mono)
    agg = report['aggregate']
    print(f"{agg['converged']}/{agg['count']} converged, "
          f"max steps to threshold {agg['max_steps_to_threshold']}, "
          f"safety violations {agg['safety_violations']}")
    print(f"  results: {out_dir}")
    return 0


# ===== PARSER =====

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cli.py", description="Resilient distributed state estimation")
    parser.add_argument('--config', help="configuration YAML (default: config.yaml)")
    parser.add_argument('--verbose', '-v', action='store_true', help="debug logging")
    sub = parser.add_subparsers(dest='command', required=True)

    def graph_and_sources(p, need_model=False):
        p.add_argument('--graph', required=True, help="graph file (N/E/C/T lines)")
        p.add_argument('--model', required=need_model, help="model file; sources come from it")
        if not need_model:
            p.add_argument('--sources', type=_parse_nodes, help="comma-separated source nodes")

    def filter_level(p):
        p.add_argument('--f', type=int, default=1, help="adversary bound f (r = 2f+1)")
        p.add_argument('--mono', action='store_true', help="unbounded mono-chromatic variant")

    p = sub.add_parser('check-robust', help="strong robustness verdict and counterexample")
    graph_and_sources(p)
    filter_level(p)
    p.add_argument('--r', type=_parse_r, help="redundancy level; overrides --f/--mono")
    p.set_defaults(func=cmd_check_robust)

    p = sub.add_parser('build-medag', help="construct and print MEDAGs")
    graph_and_sources(p)
    filter_level(p)
    p.add_argument('--out', help="write MEDAG file instead of printing")
    p.set_defaults(func=cmd_build_medag)

    p = sub.add_parser('simulate', help="run a scenario file")
    p.add_argument('--scenario', required=True)
    p.add_argument('--out-dir', help="output directory (default from scenario/config)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser('design-trust', help="greedy trusted-node selection")
    graph_and_sources(p)
    p.add_argument('--r', type=_parse_r, required=True)
    p.add_argument('--exact', action='store_true', help="also compute the brute-force minimum")
    p.add_argument('--use-colors', action='store_true', help="let three active colors activate a node")
    p.set_defaults(func=cmd_design_trust)

    p = sub.add_parser('design-colors', help="exhaustive color allocation")
    graph_and_sources(p, need_model=True)
    p.add_argument('--r', type=_parse_r, required=True)
    p.add_argument('--q', type=int, default=3, help="number of colors")
    p.add_argument('--min-colors', action='store_true', help="smallest q up to --q that works")
    p.set_defaults(func=cmd_design_colors)

    p = sub.add_parser('reduce', help="set cover reductions")
    p.add_argument('problem', choices=['sc', 'dsc'])
    p.add_argument('--in', dest='input', required=True, help="set cover instance file")
    p.add_argument('--out-dir', required=True)
    p.add_argument('--solve', action='store_true', help="solve both sides by brute force")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser('sweep', help="seeded convergence sweep")
    p.add_argument('--seed-start', type=int, default=0)
    p.add_argument('--count', type=int, default=20)
    p.add_argument('--f', type=int, default=1)
    p.add_argument('--jobs', type=int, default=1)
    p.add_argument('--out-dir')
    p.add_argument('--workbook', action='store_true', help="also write sweep.xlsx")
    p.add_argument('--mono', action='store_true', help="compromise a whole color class of MONO-robust networks")
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format='%(asctime)s [%(levelname)s] %(name)s: %(message)s'
    )
    try:
        if args.config:
            use_config(args.config)
        return args.func(args)
    except (ResilientEstimationError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
