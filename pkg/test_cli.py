"""
CLI Tests
Subcommands driven through main() with their printed reports and exit codes
"""

import pytest

from cli import main
from src.graph_model import ColoredNetwork, ring_network, write_graph_file


class TestRobustnessCommands:

    def test_check_robust(self, scenario_dir, capsys):
        code = main(['check-robust', '--graph', str(scenario_dir / "k7.txt"), '--sources', '0,1,2', '--f', '1'])
        out = capsys.readouterr().out
        assert code == 0
        assert "mode 0: YES" in out
        assert out.strip().endswith("ROBUST")

    def test_check_robust_counterexample(self, scenario_dir, capsys):
        main(['check-robust', '--graph', str(scenario_dir / "negative_control.txt"),
              '--model', str(scenario_dir / "negative_control_model.yaml")])
        out = capsys.readouterr().out
        assert "counterexample {" in out
        assert "NOT ROBUST" in out

    def test_build_medag_prints(self, scenario_dir, capsys):
        assert main(['build-medag', '--graph', str(scenario_dir / "k7.txt"), '--sources', '0,1,2']) == 0
        assert "M 0 5 : 0 1 2 @ 1" in capsys.readouterr().out

    def test_build_medag_file(self, scenario_dir, tmp_path):
        out = tmp_path / "medag.txt"
        main(['build-medag', '--graph', str(scenario_dir / "mono12.txt"), '--sources', '0,5,9',
              '--mono', '--out', str(out)])
        assert "M 0 11 : 1 6 10 @ 2" in out.read_text()

    def test_missing_graph(self, tmp_path, capsys):
        code = main(['check-robust', '--graph', str(tmp_path / "absent.txt"), '--sources', '0'])
        assert code == 2
        assert "error:" in capsys.readouterr().err

    def test_sources_required(self, scenario_dir, capsys):
        assert main(['check-robust', '--graph', str(scenario_dir / "k7.txt")]) == 2

    def test_bad_node_list(self, scenario_dir):
        with pytest.raises(SystemExit):
            main(['check-robust', '--graph', str(scenario_dir / "k7.txt"), '--sources', 'a,b'])


class TestSimulateCommand:

    def test_writes_outputs(self, scenario_dir, tmp_path, capsys):
        code = main(['simulate', '--scenario', str(scenario_dir / "k7_flocal.yaml"),
                     '--out-dir', str(tmp_path)])
        out = capsys.readouterr().out
        assert code == 0
        assert out.startswith("CONVERGED after 2 steps")
        assert (tmp_path / "trace.csv").is_file()
        assert (tmp_path / "summary.json").is_file()


class TestDesignCommands:

    def test_design_trust(self, tmp_path, capsys):
        graph = write_graph_file(ring_network(6), tmp_path / "ring.txt")
        assert main(['design-trust', '--graph', graph, '--sources', '0', '--r', '2', '--exact']) == 0
        out = capsys.readouterr().out
        assert "greedy trusted set (3): [0, 1, 2]" in out
        assert "minimum trusted set (3)" in out

    def test_design_trust_with_colors(self, tmp_path, capsys):
        fan_in = ColoredNetwork(4, [(0, 3), (1, 3), (2, 3)], colors={0: 0, 1: 1, 2: 2})
        graph = write_graph_file(fan_in, tmp_path / "fan_in.txt")
        main(['design-trust', '--graph', graph, '--sources', '0,1,2', '--r', '4'])
        main(['design-trust', '--graph', graph, '--sources', '0,1,2', '--r', '4', '--use-colors'])
        out = capsys.readouterr().out.splitlines()
        assert out == ["greedy trusted set (1): [0]", "greedy trusted set (0): []"]

    def test_design_colors(self, scenario_dir, capsys):
        main(['design-colors', '--graph', str(scenario_dir / "k7.txt"),
              '--model', str(scenario_dir / "k7_model.yaml"), '--r', '4'])
        out = capsys.readouterr().out.splitlines()
        assert out[0] == "YES"
        assert out[1].startswith("coloring: 0:0 1:1 2:2")

    def test_minimum_colors(self, scenario_dir, capsys):
        main(['design-colors', '--graph', str(scenario_dir / "k7.txt"),
              '--model', str(scenario_dir / "k7_model.yaml"), '--r', 'inf', '--min-colors'])
        assert "minimum colors: 3" in capsys.readouterr().out

    def test_reduce_set_cover(self, scenario_dir, tmp_path, capsys):
        code = main(['reduce', 'sc', '--in', str(scenario_dir / "sc_example.txt"),
                     '--out-dir', str(tmp_path), '--solve'])
        out = capsys.readouterr().out
        assert code == 0
        assert "SC answer: YES; TSRA answer: YES" in out
        assert (tmp_path / "instance.yaml").is_file()

    def test_reduce_disjoint_cover(self, scenario_dir, tmp_path, capsys):
        main(['reduce', 'dsc', '--in', str(scenario_dir / "dsc_example.txt"),
              '--out-dir', str(tmp_path), '--solve'])
        assert "3-DSC answer: NO; CSRA answer: NO" in capsys.readouterr().out


def test_sweep_command(tmp_path, capsys):
    assert main(['sweep', '--count', '2', '--out-dir', str(tmp_path)]) == 0
    assert "2/2 converged" in capsys.readouterr().out
    assert (tmp_path / "sweep.csv").is_file()


def test_mono_sweep_command(tmp_path, capsys):
    assert main(['sweep', '--count', '2', '--mono', '--out-dir', str(tmp_path)]) == 0
    assert "2/2 converged" in capsys.readouterr().out
