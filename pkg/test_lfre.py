"""
LFRE Tests
Filtering rules, safety of retained values and end-to-end convergence of the round simulator
"""

import numpy as np
import pytest

from src.adversary import AdversaryModel, AdversarySpec, Strategy, StrategyKind
from src.errors import ConfigurationError, ContractViolation, InputError, ProtocolError
from src.graph_model import ColoredNetwork, complete_network, load_graph_file, random_network
from src.lfre import (LfreConfig, LfreSimulator, LfreState, Rule, Variant, Verdict,
                      diversity_retained, lfre_round, lfre_step_diversity, lfre_step_trimmed,
                      lfre_step_trusted, sort_senders, trimmed_retained)
from src.robustness import MONO_ONLY, build_medag
from src.spectral_plant import load_model_file, model_from_sources


# ============================================================================
# Update rules
# ============================================================================

class TestTrustedRule:

    def test_single_trusted(self):
        assert lfre_step_trusted({7: 5.0, 8: -40.0}, [7], 2.0) == 10.0

    def test_midpoint(self):
        assert lfre_step_trusted({1: 4.0, 2: 6.0}, [1, 2], 1.0) == 5.0

    def test_equal_values_fixed(self):
        assert lfre_step_trusted({1: 0.3, 2: 0.3, 3: 0.3}, [1, 2, 3], 1.7) == 1.7 * 0.3

    def test_missing_trusted_estimate(self):
        with pytest.raises(ProtocolError):
            lfre_step_trusted({1: 4.0}, [1, 2], 1.0)

    def test_needs_a_trusted_neighbor(self):
        with pytest.raises(ContractViolation):
            lfre_step_trusted({1: 4.0}, [], 1.0)


RED, BLUE, GREEN = 0, 1, 2


class TestDiversityRule:

    def test_color_runs_trimmed_from_both_ends(self):
        values = {0: 9.0, 1: 7.0, 2: 5.0, 3: 3.0}
        colors = {0: RED, 1: RED, 2: BLUE, 3: GREEN}
        assert diversity_retained(values, colors) == [2]
        assert lfre_step_diversity(values, colors, 1.0) == 5.0

    def test_three_colors_keep_middle(self):
        values = {0: 9.0, 1: 5.0, 2: 1.0}
        colors = {0: RED, 1: BLUE, 2: GREEN}
        assert lfre_step_diversity(values, colors, 1.0) == 5.0

    def test_equal_values(self):
        values = {i: 2.5 for i in range(5)}
        colors = {0: RED, 1: BLUE, 2: GREEN, 3: RED, 4: BLUE}
        assert lfre_step_diversity(values, colors, 1.2) == 1.2 * 2.5

    def test_needs_three_colors(self):
        with pytest.raises(ContractViolation):
            lfre_step_diversity({0: 1.0, 1: 2.0, 2: 3.0}, {0: RED, 1: BLUE, 2: BLUE}, 1.0)

    def test_ties_by_node_id(self):
        assert sort_senders({4: 1.0, 2: 1.0, 9: 3.0}) == [9, 2, 4]

    def test_retained_values_stay_in_regular_hull(self):
        rng = np.random.default_rng(8)
        for _ in range(500):
            regular = {i: float(rng.normal()) for i in range(3)}
            colors = {0: RED, 1: BLUE, 2: GREEN}
            bad_color = int(rng.integers(3))
            values = dict(regular)
            for a in range(3, 3 + int(rng.integers(0, 6))):
                values[a] = float(rng.normal(scale=50.0))
                colors[a] = bad_color
            for extra in range(10, 10 + int(rng.integers(0, 3))):
                values[extra] = float(rng.normal())
                colors[extra] = int(rng.integers(3))
                regular[extra] = values[extra]
            lo, hi = min(regular.values()), max(regular.values())
            for node in diversity_retained(values, colors):
                assert lo <= values[node] <= hi


class TestTrimmedRule:

    def test_median_of_three(self):
        assert lfre_step_trimmed({0: 10.0, 1: 5.0, 2: 0.0}, 1, 1.0) == 5.0

    def test_trim_one_per_end(self):
        values = {0: 100.0, 1: 4.0, 2: 6.0, 3: 2.0, 4: -100.0}
        assert lfre_step_trimmed(values, 1, 2.0) == pytest.approx(8.0)

    def test_zero_trim_is_plain_average(self):
        assert lfre_step_trimmed({0: 1.0, 1: 2.0, 2: 6.0}, 0, 1.0) == pytest.approx(3.0)

    def test_too_few_senders(self):
        with pytest.raises(ProtocolError):
            lfre_step_trimmed({0: 1.0, 1: 2.0}, 1, 1.0)

    def test_retained_values_stay_in_regular_hull(self):
        rng = np.random.default_rng(21)
        for _ in range(500):
            f = int(rng.integers(0, 3))
            regular = {i: float(rng.normal()) for i in range(f + 1 + int(rng.integers(0, 4)))}
            values = dict(regular)
            for a in range(100, 100 + f):
                values[a] = float(rng.normal(scale=1e3))
            lo, hi = min(regular.values()), max(regular.values())
            for node in trimmed_retained(values, f):
                assert lo <= values[node] <= hi


def test_config_validation():
    with pytest.raises(InputError):
        LfreConfig(weight_scheme="METROPOLIS")
    with pytest.raises(InputError):
        LfreConfig(f=-1)


# ============================================================================
# Rounds
# ============================================================================

def _k4():
    net = complete_network(4)
    model = model_from_sources([1.5], {0: [0, 1, 2]}, [1.0])
    return net, model, {0: build_medag(net, {0, 1, 2}, 1)}


class TestRound:

    def test_all_sources_are_independent_observers(self):
        net = complete_network(4)
        model = model_from_sources([1.5, 0.5], {0: range(4), 1: range(4)}, [1.0, -2.0])
        sim = LfreSimulator(net, model, {})
        result = sim.run(horizon=10)
        assert result.verdict is Verdict.CONVERGED
        assert result.steps_to_threshold <= 2
        assert set(sim.rule_counts()) == {"OBSERVER"}

    def test_silent_sender_replaced_by_own_estimate(self):
        net, model, medags = _k4()
        estimates = np.array([[0.0], [1.0], [2.0], [5.0]])
        state = LfreState(0, np.array([1.0]), estimates)
        adversary = AdversarySpec(frozenset({0}), AdversaryModel.F_LOCAL, 1, Strategy(StrategyKind.SILENT))
        nxt, rows = lfre_round(net, medags, model, state, adversary, LfreConfig(f=1))
        # sorted (5 from node 3 itself, 2, 1): the middle value survives
        assert nxt.estimates[3, 0] == 3.0
        assert nxt.k == 1
        assert nxt.x[0] == 1.5
        assert [(r.k, r.node, r.rule) for r in rows] == [(1, 1, "OBSERVER"), (1, 2, "OBSERVER"),
                                                         (1, 3, "TRIMMED")]

    def test_state_shape_checked(self):
        net, model, medags = _k4()
        with pytest.raises(InputError):
            LfreSimulator(net, model, medags, state=LfreState(0, np.array([1.0]), np.zeros((3, 1))))

    def test_mono_chromatic_cannot_trim(self):
        net, model, medags = _k4()
        sim = LfreSimulator(net, model, medags, config=LfreConfig(Variant.MONO_CHROMATIC))
        assert sim.plan[(3, 0)] is Rule.TRIMMED
        with pytest.raises(ConfigurationError):
            sim.step()

    def test_unreached_nodes_run_open_loop(self, negative_control):
        model = model_from_sources([1.5], {0: [0]}, [1.0])
        medag = build_medag(negative_control, {0}, 1)
        sim = LfreSimulator(negative_control, model, {0: medag}, config=LfreConfig(f=1))
        assert sim.plan[(1, 0)] is Rule.OPEN_LOOP
        sim.step()
        assert sim.state.estimates[1, 0] == 0.0


class TestErrorDynamics:

    def test_trusted_rule_scales_mean_neighbor_error(self):
        net = ColoredNetwork(3, [(0, 2), (1, 2)], trusted=[0, 1])
        model = model_from_sources([1.5], {0: [0, 1]}, [1.0])
        medags = {0: build_medag(net, {0, 1}, 1)}
        rng = np.random.default_rng(30)
        for _ in range(20):
            estimates = rng.normal(size=(3, 1))
            x = rng.normal(size=1)
            nxt, rows = lfre_round(net, medags, model, LfreState(0, x, estimates))
            assert rows[-1].rule == "TRUSTED"
            before = estimates[:, 0] - x[0]
            after = nxt.estimates[2, 0] - nxt.x[0]
            assert after == pytest.approx(1.5 * (before[0] + before[1]) / 2)

    def test_zero_filter_is_plain_averaging(self):
        rng = np.random.default_rng(31)
        for _ in range(20):
            net = random_network(8, 0.5, 1, 0.0, rng)
            medag = build_medag(net, {0}, 0)
            model = model_from_sources([1.2], {0: [0]})
            estimates = rng.normal(size=(8, 1))
            state = LfreState(0, np.array([0.5]), estimates)
            nxt, _ = lfre_round(net, {0: medag}, model, state, None, LfreConfig(f=0))
            for i, informants in medag.neighbors.items():
                if i == 0:
                    continue
                expected = 1.2 * np.mean([estimates[l, 0] for l in informants])
                assert nxt.estimates[i, 0] == pytest.approx(expected)

    def test_senders_outside_neighbor_lists_are_ignored(self, k7, k7_model):
        medags = {0: build_medag(k7, {0, 1, 2}, 1)}
        assert all(5 not in nbrs for nbrs in medags[0].neighbors.values())
        traces = []
        for strategy in (Strategy(StrategyKind.CONSTANT, value=1e6),
                         Strategy(StrategyKind.SPLIT_BRAIN, magnitude=80.0),
                         Strategy(StrategyKind.RANDOM, range=300.0)):
            adversary = AdversarySpec(frozenset({5}), AdversaryModel.F_LOCAL, 1, strategy)
            start = LfreState(0, np.array([1.0]), np.random.default_rng(4).normal(size=(7, 1)))
            sim = LfreSimulator(k7, k7_model, medags, adversary, LfreConfig(f=1), seed=3, state=start)
            for _ in range(8):
                sim.step()
            traces.append(sim.trace.rows)
        assert traces[0] == traces[1] == traces[2]


class TestConvergence:

    @pytest.mark.parametrize("bad_node", [0, 4])
    def test_complete_graph_constant_adversary(self, k7, k7_model, bad_node):
        medags = {0: build_medag(k7, {0, 1, 2}, 1)}
        adversary = AdversarySpec(frozenset({bad_node}), AdversaryModel.F_LOCAL, 1,
                                  Strategy(StrategyKind.CONSTANT, value=1000.0))
        sim = LfreSimulator(k7, k7_model, medags, adversary, LfreConfig(f=1))
        result = sim.run(horizon=150, threshold=1e-6)
        assert result.verdict is Verdict.CONVERGED
        assert result.final_max_error < 1e-6
        assert result.safety_violations == 0
        for row in result.trace.rows:
            assert row.node != bad_node

    @pytest.mark.parametrize("kind", list(StrategyKind))
    def test_whole_color_class_adversarial(self, scenario_dir, kind):
        net = load_graph_file(scenario_dir / "mono12.txt")
        model = load_model_file(scenario_dir / "mono12_model.yaml")
        medags = {0: build_medag(net, {0, 5, 9}, MONO_ONLY)}
        adversary = AdversarySpec(frozenset(range(5)), AdversaryModel.MONO_CHROMATIC, None,
                                  Strategy(kind, range=500.0), color=0)
        sim = LfreSimulator(net, model, medags, adversary, LfreConfig(Variant.MONO_CHROMATIC), seed=2)
        result = sim.run(horizon=300, threshold=1e-6)
        assert result.verdict is Verdict.CONVERGED
        assert result.safety_violations == 0
        assert result.safety_checks > 0
        assert sim.rule_counts() == {"OBSERVER": 9, "DIVERSITY": 5}

    def test_open_loop_mode_sets_convergence_time(self, scenario_dir):
        net = load_graph_file(scenario_dir / "mono12.txt")
        model = load_model_file(scenario_dir / "mono12_model.yaml")
        medags = {0: build_medag(net, {0, 5, 9}, MONO_ONLY)}
        sim = LfreSimulator(net, model, medags, config=LfreConfig(Variant.MONO_CHROMATIC))
        result = sim.run(horizon=300, threshold=1e-6)
        # the unmeasured stable mode starts 1 off and halves each round
        assert result.steps_to_threshold == 20
        assert len(result.trace.max_errors) == 21
        assert len(result.trace.states) == 21
