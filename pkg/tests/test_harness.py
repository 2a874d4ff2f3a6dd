import json
from pathlib import Path

import numpy as np
import pytest

from satlearn.cli import main
from satlearn.config import load_config
from satlearn.errors import ConfigurationError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

MINIMAL = """
[constellation]
total_satellites = 24
planes = 4
phasing = 1
inclination_deg = 53.0
altitude_km = 550.0
pattern = "delta"

[link]
carrier_frequency_hz = 2.4e9
eirpg_dbw = 10.0
bandwidth_hz = 32e6
max_doppler_hz = 60e3

[sampling]
step_s = 300.0

[tree]
method = "chain"

[train]
learning_rate = 0.2
iterations = 8
engine = "relaysum"
model = "quadratic"
seed = 0

[dataset]
kind = "quadratic-targets"
dim = 2
plane_spread = 1.0
jitter = 0.1

[output]
directory = "out"
"""


@pytest.fixture
def minimal_config(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(MINIMAL)
    return path


class TestConfigLoading:
    def test_checked_in_configs_parse(self):
        for name in ("walker_delta_42_7.toml", "walker_star_50_5.toml", "quadratic_chain.toml"):
            cfg = load_config(CONFIGS / name)
            assert cfg.constellation.planes in (5, 7)

    def test_minimal_roundtrip(self, minimal_config):
        cfg = load_config(minimal_config)
        assert cfg.constellation.satellites_per_plane == 6
        assert cfg.tree.method == "chain"
        assert cfg.train.model == "quadratic"

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text(MINIMAL.replace("step_s = 300.0", "step_s = 300.0\ntypo_key = 1"))
        with pytest.raises(ConfigurationError, match="typo_key"):
            load_config(path)

    def test_unknown_section_rejected(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text(MINIMAL + "\n[plotting]\nstyle = 'x'\n")
        with pytest.raises(ConfigurationError, match="plotting"):
            load_config(path)

    def test_missing_required_section(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("[constellation]\ntotal_satellites = 4\nplanes = 2\nphasing = 0\n"
                        "inclination_deg = 50.0\naltitude_km = 550.0\n")
        with pytest.raises(ConfigurationError, match="link"):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_config(tmp_path / "nope.toml")

    def test_missing_tree_file(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text(MINIMAL.replace('method = "chain"', 'method = "explicit-file"\nfile = "gone.json"'))
        with pytest.raises(ConfigurationError, match="gone.json"):
            load_config(path)

    def test_config_hash_stable(self, minimal_config):
        assert load_config(minimal_config).config_hash() == load_config(minimal_config).config_hash()


class TestCliExitCodes:
    def test_unknown_key_exit_2(self, tmp_path, capsys):
        path = tmp_path / "bad.toml"
        path.write_text(MINIMAL + "\n[plotting]\nstyle = 'x'\n")
        assert main(["topology", "--config", str(path), "--out", str(tmp_path / "o")]) == 2

    def test_fmax_zero_exit_3(self, tmp_path, capsys):
        path = tmp_path / "dead.toml"
        path.write_text(MINIMAL.replace("max_doppler_hz = 60e3", "max_doppler_hz = 0.0"))
        assert main(["topology", "--config", str(path), "--out", str(tmp_path / "o")]) == 3
        err = capsys.readouterr().err
        assert "disconnected" in err

    def test_nan_training_exit_4_partial_metrics(self, tmp_path):
        # diverging quadratic: |1 - lr| > 1 grows until it overflows mid-run
        bad = MINIMAL.replace("learning_rate = 0.2", "learning_rate = 2.5")
        bad = bad.replace("plane_spread = 1.0", "plane_spread = 1e300")
        bad = bad.replace("iterations = 8", "iterations = 2000")
        path = tmp_path / "diverge.toml"
        path.write_text(bad)
        out = tmp_path / "o"
        assert main(["train", "--config", str(path), "--out", str(out)]) == 4
        lines = (out / "metrics.jsonl").read_text().strip().splitlines()
        assert len(lines) >= 1  # partial metrics preserved
        assert (out / "summary.csv").exists()


class TestTopologyAndTree:
    def test_topology_artifacts(self, minimal_config, tmp_path, capsys):
        out = tmp_path / "topo"
        assert main(["topology", "--config", str(minimal_config), "--out", str(out),
                     "--positions-csv"]) == 0
        graph = json.loads((out / "graph.json").read_text())
        assert graph["n_planes"] == 4
        assert (out / "graph.dot").read_text().startswith("graph interplane")
        assert (out / "positions.csv").exists()
        assert "connected=True" in capsys.readouterr().out

    def test_tree_from_graph_artifact(self, minimal_config, tmp_path):
        out = tmp_path / "topo"
        main(["topology", "--config", str(minimal_config), "--out", str(out)])
        assert main(["tree", "--config", str(minimal_config), "--out", str(out),
                     "--graph", str(out / "graph.json"), "--tree-method", "optimized"]) == 0
        tree = json.loads((out / "tree.json").read_text())
        assert len(tree["edges"]) == 3
        assert tree["tau_tilde"] == tree["hop_diameter"]

    def test_single_plane_warning(self, tmp_path, capsys):
        cfg = MINIMAL.replace("total_satellites = 24", "total_satellites = 6")
        cfg = cfg.replace("planes = 4", "planes = 1")
        path = tmp_path / "single.toml"
        path.write_text(cfg)
        assert main(["topology", "--config", str(path), "--out", str(tmp_path / "o")]) == 0
        assert "single-plane" in capsys.readouterr().out

    def test_debug_links_export(self, minimal_config, tmp_path):
        out = tmp_path / "topo"
        assert main(["topology", "--config", str(minimal_config), "--out", str(out),
                     "--debug-links"]) == 0
        header = (out / "links_debug.csv").read_text().splitlines()[0]
        assert "rel_speed_los_km_s" in header and "rel_speed_raw_km_s" in header

    def test_checkpoint_files_written(self, tmp_path, minimal_config):
        cfg = MINIMAL.replace("seed = 0", "seed = 0\ncheckpoint_every = 3")
        path = tmp_path / "ck.toml"
        path.write_text(cfg)
        out = tmp_path / "o"
        assert main(["train", "--config", str(path), "--out", str(out)]) == 0
        assert (out / "checkpoint_00002.bin").exists()
        assert (out / "checkpoint_00005.bin").exists()
        assert np.fromfile(out / "checkpoint_00002.bin").shape == (2,)

    def test_explicit_tree_echoed_verbatim(self, tmp_path):
        tree_path = tmp_path / "mytree.json"
        tree_path.write_text(json.dumps({
            "n_vertices": 4, "edges": [[0, 1], [1, 2], [2, 3]],
        }))
        cfg = MINIMAL.replace('method = "chain"', f'method = "explicit-file"\nfile = "mytree.json"')
        path = tmp_path / "run.toml"
        path.write_text(cfg)
        out = tmp_path / "o"
        assert main(["tree", "--config", str(path), "--out", str(out)]) == 0
        echoed = json.loads((out / "tree.json").read_text())
        assert echoed["edges"] == [[0, 1], [1, 2], [2, 3]]


class TestTrainCli:
    def test_train_writes_artifacts_and_is_deterministic(self, minimal_config, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert main(["train", "--config", str(minimal_config), "--out", str(out_a)]) == 0
        assert main(["train", "--config", str(minimal_config), "--out", str(out_b)]) == 0
        assert (out_a / "metrics.jsonl").read_bytes() == (out_b / "metrics.jsonl").read_bytes()
        assert (out_a / "summary.csv").read_bytes() == (out_b / "summary.csv").read_bytes()
        manifest = json.loads((out_a / "manifest.json").read_text())
        assert manifest["config_hash"] == json.loads((out_b / "manifest.json").read_text())["config_hash"]
        records = [json.loads(l) for l in (out_a / "metrics.jsonl").read_text().splitlines()]
        assert len(records) == 8
        assert records[-1]["rounds"] == 8

    def test_seed_override_changes_metrics(self, minimal_config, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        main(["train", "--config", str(minimal_config), "--out", str(out_a)])
        main(["train", "--config", str(minimal_config), "--out", str(out_b), "--seed", "7"])
        assert (out_a / "metrics.jsonl").read_bytes() != (out_b / "metrics.jsonl").read_bytes()

    def test_output_root_env(self, minimal_config, tmp_path, monkeypatch):
        monkeypatch.setenv("SATLEARN_OUTPUT_ROOT", str(tmp_path / "root"))
        assert main(["train", "--config", str(minimal_config), "--out", "rel"]) == 0
        assert (tmp_path / "root" / "rel" / "metrics.jsonl").exists()


class TestPaperConfigurations:
    def test_delta_topology_and_trees_via_cli(self, tmp_path):
        cfg = str(CONFIGS / "walker_delta_42_7.toml")
        out = tmp_path / "delta"
        assert main(["topology", "--config", cfg, "--out", str(out)]) == 0
        graph = json.loads((out / "graph.json").read_text())
        assert graph["n_planes"] == 7
        assert main(["tree", "--config", cfg, "--out", str(out),
                     "--graph", str(out / "graph.json")]) == 0
        assert json.loads((out / "tree.json").read_text())["hop_diameter"] == 3
        assert main(["tree", "--config", cfg, "--out", str(out),
                     "--graph", str(out / "graph.json"), "--tree-method", "chain"]) == 0
        assert json.loads((out / "tree.json").read_text())["hop_diameter"] == 6

    def test_quadratic_chain_relaysum_beats_gossip(self, tmp_path):
        # deployed-model comparison: each plane runs its own model, so the
        # engines are ranked on mean_i f(x_i) - f*. (At the mean model the
        # quadratic is blind to gossip's consensus error: double
        # stochasticity keeps the node mean exact there.)
        cfg = str(CONFIGS / "quadratic_chain.toml")
        final = {}
        for engine in ("relaysum", "gossip"):
            out = tmp_path / engine
            assert main(["train", "--config", cfg, "--out", str(out),
                         "--engine", engine]) == 0
            last = json.loads((out / "metrics.jsonl").read_text().splitlines()[-1])
            assert last["rounds"] == 60
            final[engine] = last["suboptimality_node_mean"]
        assert final["relaysum"] < final["gossip"]


class TestEnergyCli:
    def test_energy_report(self, tmp_path):
        cfg = MINIMAL.replace('model = "quadratic"', 'model = "spiking-mlp"')
        cfg = cfg.replace('kind = "quadratic-targets"', 'kind = "mini-images"\nn_train = 96\nn_test = 32')
        cfg = cfg.replace("iterations = 8", "iterations = 2")
        path = tmp_path / "run.toml"
        path.write_text(cfg)
        out = tmp_path / "o"
        assert main(["train", "--config", str(path), "--out", str(out)]) == 0
        assert main(["energy", "--config", str(path), "--out", str(out),
                     "--checkpoint", str(out / "model")]) == 0
        rows = (out / "energy.csv").read_text().strip().splitlines()
        assert rows[0].startswith("layer,")
        assert rows[-1].startswith("total,")
        header = rows[0].split(",")
        total = rows[-1].split(",")
        ann, snn = float(total[header.index("ann_joules")]), float(total[header.index("snn_joules")])
        assert snn < ann

    def test_energy_without_rates_exit_2(self, tmp_path, minimal_config):
        from satlearn.snn import LayerSpec, SpikingNet, save_checkpoint

        net = SpikingNet((8,), [LayerSpec("dense", 4)], 2, init_seed=0)
        save_checkpoint(tmp_path / "ck", net, None)
        assert main(["energy", "--config", str(minimal_config), "--out", str(tmp_path / "o"),
                     "--checkpoint", str(tmp_path / "ck")]) == 2
