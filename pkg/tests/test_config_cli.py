import json

import numpy as np
import pytest

from atat.cli import main
from atat.config import RunConfig, derive_seed
from atat.errors import InvalidConfig

TINY = ["--set", "data.n_train=6", "--set", "data.n_test=4", "--set", "data.synthetic_eeg=12",
        "--set", "data.synthetic_emg=48", "--set", "ae.epochs=1", "--set", "ae.batch=3",
        "--set", "gan.epochs=1", "--set", "gan.batch=6", "--set", "gan.cycles_per_iteration=1",
        "--set", "gate.epochs=1", "--set", "gate.batch=12"]


class TestConfig:
    def test_round_trip(self, tmp_path):
        cfg = RunConfig(seed=9, snr_levels=(-5.0, 0.0)).override("gan.epochs", "3").override("skip_gan", "true")
        back = RunConfig.load(cfg.save(tmp_path / "c.json"))
        assert back == cfg and back.gan.epochs == 3 and back.skip_gan is True

    @pytest.mark.parametrize("d", [{"nope": 1}, {"gan": {"nope": 1}}, {"snr_levels": [2, -7]}, {"threads": 0},
                                   {"data": {"source": "files"}}, {"gan": 3}])
    def test_invalid(self, d):
        with pytest.raises(InvalidConfig):
            RunConfig.from_dict(d)

    def test_bad_override(self):
        with pytest.raises(InvalidConfig):
            RunConfig().override("gan.epochs", "ten")
        with pytest.raises(InvalidConfig):
            RunConfig().override("seed.x", "1")

    def test_bad_json(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("{")
        with pytest.raises(InvalidConfig):
            RunConfig.load(p)

    def test_hyperparameters_exclude_paths(self):
        h = RunConfig(data_dir="/somewhere").hyperparameters()
        assert "data_dir" not in h and "out" not in h and "eeg_pool" not in h["data"]

    def test_derived_seeds(self):
        assert derive_seed(0, "gate") == derive_seed(0, "gate")
        assert len({derive_seed(s, n) for s in (0, 1) for n in ("gate", "ae:-7", "ae:2")}) == 6


class TestCli:
    def test_usage_errors_exit_1(self, tmp_path, capsys):
        assert main_exit([]) == 1
        assert main_exit(["bogus"]) == 1
        assert main(["generate", "--run-dir", str(tmp_path / "r"), "--set", "gan.nope=1"]) == 1
        assert main(["generate", "--run-dir", str(tmp_path / "r"), "--snr", "5"]) == 1
        assert main(["eval", "--run-dir", str(tmp_path / "r"), "--checkpoints", str(tmp_path)]) == 1

    def test_data_errors_exit_2(self, tmp_path):
        r = str(tmp_path / "r")
        assert main(["denoise", str(tmp_path / "missing.npy"), "--run-dir", r, "--checkpoints", r]) == 2
        bad = tmp_path / "bad.csv"
        bad.write_text("1,2,x\n")
        assert main(["denoise", str(bad), "--run-dir", r, "--checkpoints", r]) == 2
        assert main(["generate", "--run-dir", r, "--set", "data.synthetic_eeg=3"]) == 2

    def test_missing_checkpoints_exit_1(self, tmp_path):
        x = tmp_path / "x.npy"
        np.save(x, np.random.default_rng(0).standard_normal((2, 512)))
        assert main(["denoise", str(x), "--run-dir", str(tmp_path / "r"), "--checkpoints", str(tmp_path)]) == 1

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_exit_3(self, tmp_path):
        r = str(tmp_path / "r")
        assert main(["train-ae", "--run-dir", r, *TINY, "--set", "ae.lr=1e300"]) == 3

    def test_generate_train_denoise_eval(self, tmp_path):
        run = tmp_path / "run"
        assert main(["generate", "--run-dir", str(run / "gen"), *TINY]) == 0
        data = run / "gen" / "dataset" / "manifest.json"
        assert data.exists()
        common = ["--data-dir", str(data), *TINY]
        assert main(["train-all", "--run-dir", str(run / "train"), *common]) == 0
        ckpt = run / "train" / "checkpoints"
        assert {p.name for p in ckpt.iterdir()} == {"gate.ckpt", "ae_-7dB.ckpt", "ae_2dB.ckpt",
                                                    "gan_-7dB.ckpt", "gan_2dB.ckpt"}
        assert json.loads((run / "train" / "config.json").read_text())["ae"]["epochs"] == 1

        x = tmp_path / "x.csv"
        np.savetxt(x, np.random.default_rng(1).standard_normal((3, 512)), delimiter=",")
        assert main(["denoise", str(x), "--run-dir", str(run / "den"), "--checkpoints", str(ckpt), *TINY]) == 0
        assert len((run / "den" / "denoised.csv").read_text().splitlines()) == 3

        assert main(["eval", "--run-dir", str(run / "ev"), "--checkpoints", str(ckpt), *common]) == 0
        summary = json.loads((run / "ev" / "report" / "summary.json").read_text())
        assert set(summary["aggregates"]) == {"-7", "2"}
        assert summary["param_counts"]["gen:-7"] == 19841

        # the ablation evaluates the same checkpoints without generators
        assert main(["eval", "--run-dir", str(run / "ab"), "--checkpoints", str(ckpt), "--skip-gan", *common]) == 0
        assert "gen:-7" not in json.loads((run / "ab" / "report" / "summary.json").read_text())["param_counts"]

    def test_timestamped_run_dir(self, tmp_path):
        assert main(["generate", "--out", str(tmp_path), *TINY, "--seed", "3"]) == 0
        (run,) = list(tmp_path.iterdir())
        assert run.name.endswith("-seed3") and (run / "config.json").exists()


def main_exit(argv):
    try:
        return main(argv)
    except SystemExit as e:
        return e.code
