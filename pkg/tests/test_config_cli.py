import os

import numpy as np
import pytest

from orbitfilter.cli import cmd_run, main
from orbitfilter.config import (
    DEFAULT_LINK,
    ConfigError,
    ExperimentConfig,
    parse_config,
    render_config,
)
from orbitfilter.models import load_model
from orbitfilter.pipeline import DEFAULT_MAC_RATE

TINY = """
seed = 3
dataset.n_synthetic = 24
training.epochs = 2
training.batch = 8
"""


class TestParseConfig:
    def test_empty_document_gives_defaults(self):
        cfg = parse_config("")
        assert cfg.seed == 0
        assert cfg.dataset.source == "synthetic"
        assert cfg.dataset.n_synthetic == 2100
        assert cfg.dataset.train_fraction == 0.8
        assert cfg.training.epochs == 25
        assert cfg.training.lr == 0.001
        assert cfg.training.batch == 32
        assert cfg.edge.arch == "msnet"
        assert cfg.edge.mac_rate == DEFAULT_MAC_RATE
        assert cfg.modes == ("bent_pipe", "edge_filter")
        assert cfg.link.base_latency_s == DEFAULT_LINK.base_latency_s
        assert cfg.link.per_image_s == DEFAULT_LINK.per_image_s

    def test_comments_and_blanks(self):
        cfg = parse_config("# a comment\n\nseed = 9   # trailing\n")
        assert cfg.seed == 9

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="dataset.shuffle: unknown key"):
            parse_config("dataset.shuffle = yes")

    def test_type_mismatch(self):
        with pytest.raises(ConfigError, match="training.epochs: expected an integer"):
            parse_config("training.epochs = many")

    def test_negative_epochs(self):
        with pytest.raises(ConfigError, match="training.epochs"):
            parse_config("training.epochs = -1")

    def test_fraction_range(self):
        with pytest.raises(ConfigError, match="dataset.train_fraction"):
            parse_config("dataset.train_fraction = 1.0")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config("seed = 1\nseed = 2")

    def test_modes_validation(self):
        assert parse_config("modes = bent_pipe").modes == ("bent_pipe",)
        with pytest.raises(ConfigError, match="unknown mode"):
            parse_config("modes = bent_pipe, warp_drive")
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config("modes = bent_pipe, bent_pipe")

    def test_binarization_override(self):
        cfg = parse_config("binarization.golfcourse = artificial")
        assert cfg.binarization == {"golfcourse": "artificial"}
        with pytest.raises(ConfigError, match="unknown scene class"):
            parse_config("binarization.volcano = natural")

    def test_directory_requires_path(self):
        with pytest.raises(ConfigError, match="dataset.path: required"):
            parse_config("dataset.source = directory")

    def test_bandwidth_form_resolves_per_image_cost(self):
        cfg = parse_config(
            "link.bytes_per_image = 400000\n"
            "link.bandwidth_bytes_per_s = 50000000\n"
            "link.per_image_overhead_s = 0.001\n")
        params = cfg.link_params()
        assert params.per_image_s == pytest.approx(400000 / 50000000 + 0.001)
        dump = render_config(cfg)
        assert "resolved per-image cost" in dump

    def test_bandwidth_form_is_exclusive(self):
        with pytest.raises(ConfigError, match="not both"):
            parse_config(
                "link.per_image_s = 0.01\n"
                "link.bytes_per_image = 1000\n"
                "link.bandwidth_bytes_per_s = 10000\n")
        with pytest.raises(ConfigError, match="go together"):
            parse_config("link.bytes_per_image = 1000")
        with pytest.raises(ConfigError, match="bytes/bandwidth form"):
            parse_config("link.per_image_overhead_s = 0.001")

    def test_garbage_line(self):
        with pytest.raises(ConfigError, match="expected 'key = value'"):
            parse_config("this is not a config line")


class TestRenderFixpoint:
    def test_defaults_round_trip(self):
        cfg = parse_config("")
        assert parse_config(render_config(cfg)) == cfg

    def test_custom_round_trip(self):
        text = (
            "seed = 11\n"
            "dataset.n_synthetic = 50\n"
            "training.lr = 0.0005\n"
            "link.jitter_std_s = 0.002\n"
            "edge.arch = simple_cnn\n"
            "modes = edge_filter\n"
            "binarization.river = artificial\n")
        cfg = parse_config(text)
        assert parse_config(render_config(cfg)) == cfg

    def test_bandwidth_round_trip(self):
        cfg = parse_config(
            "link.bytes_per_image = 123456.0\n"
            "link.bandwidth_bytes_per_s = 9e6\n")
        assert parse_config(render_config(cfg)) == cfg


class TestCmdRun:
    def test_writes_artifacts_and_is_deterministic(self, tmp_path):
        cfg = parse_config(TINY)
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        paths1 = cmd_run(cfg, str(out1), log=lambda *_: None)
        paths2 = cmd_run(parse_config(TINY), str(out2), log=lambda *_: None)
        for key in ("csv", "md", "config", "model"):
            assert os.path.exists(paths1[key])
        assert (out1 / "report.csv").read_bytes() == (out2 / "report.csv").read_bytes()
        assert (out1 / "model-msnet.ofw").read_bytes() == \
            (out2 / "model-msnet.ofw").read_bytes()

    def test_csv_layout(self, tmp_path):
        cfg = parse_config(TINY)
        paths = cmd_run(cfg, str(tmp_path / "out"), log=lambda *_: None)
        lines = open(paths["csv"]).read().splitlines()
        assert lines[0] == "Metric,Bent Pipe,MobileShuffleNet"
        labels = [line.split(",")[0] for line in lines[1:]]
        assert labels == [
            "Edge Processing Time (s)", "Transmission Time (s)", "Total Time (s)",
            "Recall", "Precision", "F1-Score", "Images Transmitted",
            "Time Saved vs Bent Pipe"]
        bent = {line.split(",")[0]: line.split(",")[1] for line in lines[1:]}
        assert bent["Recall"] == "/"
        assert bent["Edge Processing Time (s)"] == "0.00"

    def test_bent_pipe_only(self, tmp_path):
        cfg = parse_config(TINY + "modes = bent_pipe\n")
        paths = cmd_run(cfg, str(tmp_path / "out"), log=lambda *_: None)
        lines = open(paths["csv"]).read().splitlines()
        assert lines[0] == "Metric,Bent Pipe"
        assert "model" not in paths

    def test_resolved_config_reparses_equal(self, tmp_path):
        cfg = parse_config(TINY)
        paths = cmd_run(cfg, str(tmp_path / "out"), log=lambda *_: None)
        assert parse_config(open(paths["config"]).read()) == cfg

    def test_saved_model_loads(self, tmp_path):
        cfg = parse_config(TINY)
        paths = cmd_run(cfg, str(tmp_path / "out"), log=lambda *_: None)
        model = load_model(paths["model"])
        assert model.name == "msnet"
        out = model.forward(np.zeros((1, 3, 64, 64)))
        assert out.shape == (1, 2)


class TestMain:
    def test_run_exit_zero(self, tmp_path):
        cfg_path = tmp_path / "cfg.txt"
        cfg_path.write_text(TINY)
        code = main(["run", "--config", str(cfg_path), "--out", str(tmp_path / "o")])
        assert code == 0
        assert (tmp_path / "o" / "report.csv").exists()
        assert (tmp_path / "o" / "report.md").exists()

    def test_train_subcommand(self, tmp_path):
        cfg_path = tmp_path / "cfg.txt"
        cfg_path.write_text(TINY)
        code = main(["train", "--config", str(cfg_path), "--out", str(tmp_path / "t")])
        assert code == 0
        assert (tmp_path / "t" / "model-msnet.ofw").exists()
        assert not (tmp_path / "t" / "report.csv").exists()

    def test_simulate_subcommand(self, capsys):
        code = main(["simulate", "420", "272"])
        assert code == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0] == "images,transmission_time_s"
        assert out[1] == "420,3.9600"
        assert out[2] == "272,2.6100"

    def test_simulate_reproduces_published_times(self, capsys):
        # the default calibrated link fed the five published counts
        published = {420: 3.96, 276: 2.66, 282: 2.65, 279: 2.65, 272: 2.61}
        code = main(["simulate"] + [str(n) for n in published])
        assert code == 0
        lines = capsys.readouterr().out.splitlines()[1:]
        for line, (n, want) in zip(lines, published.items()):
            count, seconds = line.split(",")
            assert int(count) == n
            assert abs(float(seconds) - want) / want < 0.02

    def test_macs_subcommand(self, capsys):
        code = main(["macs", "msnet"])
        assert code == 0
        out = capsys.readouterr().out
        assert "3,428,608" in out

    def test_calibrate_subcommand(self, capsys):
        code = main(["calibrate", "--point", "420:3.96", "--point", "272:2.61"])
        assert code == 0
        out = capsys.readouterr().out
        assert "link.per_image_s = 0.009121621621621" in out

    def test_bad_config_nonzero_exit(self, tmp_path, capsys):
        cfg_path = tmp_path / "bad.txt"
        cfg_path.write_text("training.epochs = banana\n")
        code = main(["run", "--config", str(cfg_path), "--out", str(tmp_path / "o")])
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_seed_precedence(self, tmp_path, monkeypatch, capsys):
        cfg_path = tmp_path / "cfg.txt"
        cfg_path.write_text("seed = 1\ndataset.n_synthetic = 8\ntraining.epochs = 0\n")
        # env beats config
        monkeypatch.setenv("ORBITFILTER_SEED", "2")
        main(["train", "--config", str(cfg_path), "--out", str(tmp_path / "a")])
        text_a = open(tmp_path / "a" / "resolved-config.txt").read()
        assert "seed = 2" in text_a
        # flag beats env
        main(["train", "--config", str(cfg_path), "--seed", "5",
              "--out", str(tmp_path / "b")])
        text_b = open(tmp_path / "b" / "resolved-config.txt").read()
        assert "seed = 5" in text_b

    def test_env_seed_must_be_integer(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("ORBITFILTER_SEED", "lots")
        code = main(["simulate", "10"])
        assert code == 1
        assert "ORBITFILTER_SEED" in capsys.readouterr().err

    def test_training_divergence_exits_nonzero(self, tmp_path, monkeypatch, capsys):
        import orbitfilter.cli as cli_mod

        def exploding(*args, **kwargs):
            raise RuntimeError("training diverged: non-finite loss at epoch 1")

        monkeypatch.setattr(cli_mod, "train_model", exploding)
        cfg_path = tmp_path / "cfg.txt"
        cfg_path.write_text(TINY)
        code = main(["run", "--config", str(cfg_path), "--out", str(tmp_path / "o")])
        assert code == 1
        assert "training diverged" in capsys.readouterr().err
        assert not (tmp_path / "o" / "report.csv").exists()


class TestLinkParamsFromConfig:
    def test_seed_flows_into_link(self):
        cfg = parse_config("seed = 77")
        assert cfg.link_params().seed == 77

    def test_programmatic_default(self):
        cfg = ExperimentConfig()
        params = cfg.link_params()
        assert params.per_image_s == pytest.approx(1.35 / 148)
