"""End-to-end tests of the command-line interface.

Each test drives badge.cli.main inside the process (fast, coverage
friendly); one smoke test execs a real subprocess to cover the module
entry point.
"""

import configparser
import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from badge.attack import AttackConfig, load_perturbation
from badge.cli import main
from badge.victim import load_model

BLOBS = ["--data", "blobs", "--blob-seed", "0", "--blob-n", "200",
         "--blob-classes", "4", "--blob-dim", "16"]


def train_flags(out, arch="mlp", epochs="30"):
    return (["train-victim", "--arch", arch] + BLOBS +
            ["--epochs", epochs, "--lr", "0.1", "--seed", "0", "--out", str(out)])


@pytest.fixture(scope="module")
def victim_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("victims") / "mlp.bin"
    assert main(train_flags(path)) == 0
    return path


@pytest.fixture(scope="module")
def linear_victim_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("victims") / "linear.bin"
    assert main(train_flags(path, arch="linear")) == 0
    return path


def attack_flags(victim, out, *extra):
    return (["attack", "--victim", str(victim)] + BLOBS +
            ["--eps", "60", "--epochs", "5", "--seed", "0",
             "--alpha-start", "65", "--alpha-end", "6.5",
             "--delta-kind", "constant", "--delta-start", "10",
             "--out", str(out)] + list(extra))


@pytest.fixture(scope="module")
def attack_run(victim_file, tmp_path_factory):
    out = tmp_path_factory.mktemp("runs") / "run1"
    assert main(attack_flags(victim_file, out)) == 0
    return out


class TestTrainVictim:
    def test_writes_model_and_reports_accuracy(self, victim_file, capsys):
        model = load_model(victim_file)
        assert model.arch == "mlp"

    def test_same_seed_same_bytes(self, tmp_path):
        a, b = tmp_path / "a.bin", tmp_path / "b.bin"
        assert main(train_flags(a, epochs="3")) == 0
        assert main(train_flags(b, epochs="3")) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_accuracy_line(self, tmp_path, capsys):
        out = tmp_path / "v.bin"
        assert main(train_flags(out, epochs="3")) == 0
        stdout = capsys.readouterr().out
        assert "test_acc=" in stdout and str(out) in stdout

    def test_missing_required_flag_exits_1(self):
        with pytest.raises(SystemExit) as exc:
            main(["train-victim", "--arch", "mlp"])
        assert exc.value.code == 1

    def test_bad_arch_exits_1(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["train-victim", "--arch", "resnet", "--out", str(tmp_path / "x")])
        assert exc.value.code == 1

    def test_mnist_without_paths_exits_1(self, tmp_path, capsys):
        args = ["train-victim", "--arch", "linear", "--data", "mnist",
                "--out", str(tmp_path / "x.bin")]
        assert main(args) == 1
        assert "mnist" in capsys.readouterr().err.lower()

    def test_divergent_training_exits_2(self, tmp_path, capsys):
        args = (["train-victim", "--arch", "linear"] + BLOBS +
                ["--epochs", "2", "--lr", "1e308", "--out", str(tmp_path / "x.bin")])
        with np.errstate(all="ignore"):
            assert main(args) == 2
        assert "error" in capsys.readouterr().err


class TestAttack:
    def test_artifacts_present(self, attack_run):
        for name in ("config.ini", "perturbation.bin", "trace.csv",
                     "report.csv", "report.json"):
            assert (attack_run / name).exists(), name

    def test_stdout_summary(self, victim_file, tmp_path, capsys):
        out = tmp_path / "run"
        assert main(attack_flags(victim_file, out)) == 0
        line = capsys.readouterr().out
        assert "asr=" in line and "queries=" in line

    def test_config_echo_matches_run(self, attack_run):
        parser = configparser.ConfigParser()
        parser.read(attack_run / "config.ini")
        assert parser["attack"]["eps"] == "60.0"
        assert parser["attack"]["delta_kind"] == "constant"
        assert parser["attack"]["shuffle_seed"] == "0"
        cfg = AttackConfig(eps=60.0, epochs=5, alpha_start=65.0, alpha_end=6.5,
                           delta_kind="constant", delta_start=10.0,
                           shuffle_seed=0, direction_seed=0)
        assert parser["meta"]["config_hash"] == cfg.config_hash()

    def test_echoed_config_reproduces_run(self, victim_file, attack_run, tmp_path):
        # the echo is a complete config: feeding it back with no extra
        # flags must reproduce the exact perturbation
        out = tmp_path / "replay"
        args = (["attack", "--victim", str(victim_file)] + BLOBS +
                ["--config", str(attack_run / "config.ini"), "--out", str(out)])
        assert main(args) == 0
        first = (attack_run / "perturbation.bin").read_bytes()
        assert (out / "perturbation.bin").read_bytes() == first

    def test_deterministic_given_seed(self, victim_file, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(attack_flags(victim_file, a)) == 0
        assert main(attack_flags(victim_file, b)) == 0
        assert (a / "perturbation.bin").read_bytes() == (b / "perturbation.bin").read_bytes()

    def test_flags_override_config_file(self, victim_file, tmp_path):
        ini = tmp_path / "attack.ini"
        ini.write_text("[attack]\neps = 40\nepochs = 5\n"
                       "delta_kind = constant\ndelta_start = 10\n")
        out = tmp_path / "run"
        args = (["attack", "--victim", str(victim_file)] + BLOBS +
                ["--config", str(ini), "--eps", "25", "--epochs", "2",
                 "--seed", "0", "--out", str(out)])
        assert main(args) == 0
        parser = configparser.ConfigParser()
        parser.read(out / "config.ini")
        assert parser["attack"]["eps"] == "25.0"
        assert parser["attack"]["epochs"] == "2"
        # untouched keys keep the file's values
        assert parser["attack"]["delta_kind"] == "constant"
        pert = load_perturbation(out / "perturbation.bin")
        assert np.max(np.abs(pert.values)) <= 25.0 + 1e-9

    def test_unknown_config_key_exits_1(self, victim_file, tmp_path, capsys):
        ini = tmp_path / "bad.ini"
        ini.write_text("[attack]\nepsilon = 40\n")
        args = (["attack", "--victim", str(victim_file)] + BLOBS +
                ["--config", str(ini), "--out", str(tmp_path / "run")])
        assert main(args) == 1
        assert "epsilon" in capsys.readouterr().err

    def test_bad_config_value_exits_1(self, victim_file, tmp_path, capsys):
        args = (["attack", "--victim", str(victim_file)] + BLOBS +
                ["--eps", "-5", "--out", str(tmp_path / "run")])
        assert main(args) == 1
        assert "error" in capsys.readouterr().err

    def test_missing_victim_file_exits_1(self, tmp_path, capsys):
        args = (["attack", "--victim", str(tmp_path / "nope.bin")] + BLOBS +
                ["--out", str(tmp_path / "run")])
        assert main(args) == 1
        assert "nope.bin" in capsys.readouterr().err

    def test_target_flag_switches_loss(self, linear_victim_file, tmp_path):
        out = tmp_path / "targeted"
        assert main(attack_flags(linear_victim_file, out, "--target", "1")) == 0
        parser = configparser.ConfigParser()
        parser.read(out / "config.ini")
        assert parser["attack"]["loss"] == "target_acc"
        assert parser["attack"]["target_class"] == "1"
        with open(out / "report.json") as fh:
            report = json.load(fh)[0]
        assert report["target_acc"] is not None

    def test_badge_out_reroots_relative_paths(self, victim_file, tmp_path, monkeypatch):
        monkeypatch.setenv("BADGE_OUT", str(tmp_path))
        assert main(attack_flags(victim_file, "nested/run")) == 0
        assert (tmp_path / "nested" / "run" / "perturbation.bin").exists()

    def test_checkpoint_resume_round_trip(self, victim_file, tmp_path):
        # 5 epochs x 3 batches = 15 updates; interval 4 leaves the last
        # checkpoint at update 12, so the resumed run redoes 13..15
        full = tmp_path / "full"
        assert main(attack_flags(victim_file, full)) == 0
        ckpt_run = tmp_path / "ckpt"
        assert main(attack_flags(victim_file, ckpt_run,
                                 "--checkpoint-interval", "4")) == 0
        resumed = tmp_path / "resumed"
        # the config hash covers every field, so the resume must carry
        # the same checkpoint flag; cadence does not alter the trajectory
        assert main(attack_flags(victim_file, resumed,
                                 "--checkpoint-interval", "4",
                                 "--resume", str(ckpt_run / "checkpoint.bin"))) == 0
        assert ((resumed / "perturbation.bin").read_bytes()
                == (full / "perturbation.bin").read_bytes())


class TestEval:
    def test_reports_asr_and_norms(self, victim_file, attack_run, capsys):
        args = (["eval", "--victim", str(victim_file),
                 "--pert", str(attack_run / "perturbation.bin")] + BLOBS)
        assert main(args) == 0
        line = capsys.readouterr().out
        assert line.startswith("asr=")
        with open(attack_run / "report.json") as fh:
            report = json.load(fh)[0]
        assert float(line.split()[0][4:]) == pytest.approx(report["asr"], abs=0.01)

    def test_baseline_flag(self, victim_file, attack_run, capsys):
        args = (["eval", "--victim", str(victim_file),
                 "--pert", str(attack_run / "perturbation.bin")] + BLOBS +
                ["--baseline-trials", "2"])
        assert main(args) == 0
        assert "baseline_asr=" in capsys.readouterr().out

    def test_missing_pert_exits_1(self, victim_file, tmp_path, capsys):
        args = (["eval", "--victim", str(victim_file),
                 "--pert", str(tmp_path / "gone.bin")] + BLOBS)
        assert main(args) == 1
        assert "gone.bin" in capsys.readouterr().err


class TestTransfer:
    def test_matrix_stdout_and_csv(self, victim_file, linear_victim_file,
                                   attack_run, tmp_path, capsys):
        pert = str(attack_run / "perturbation.bin")
        out = tmp_path / "matrix.csv"
        args = (["transfer", "--victims", str(victim_file), str(linear_victim_file),
                 "--perts", pert, pert] + BLOBS + ["--out", str(out)])
        assert main(args) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 3
        with open(out, newline="") as fh:
            rows = list(csv.reader(fh))
        assert len(rows) == 3
        assert rows[0] == ["", "mlp.bin", "linear.bin"]
        values = [float(v) for row in rows[1:] for v in row[1:]]
        assert all(0.0 <= v <= 100.0 for v in values)


class TestSweep:
    def test_summary_and_artifacts(self, victim_file, tmp_path, capsys):
        out = tmp_path / "sweep"
        args = (["sweep", "--victim", str(victim_file)] + BLOBS +
                ["--epochs", "3", "--seed", "0",
                 "--delta-kind", "constant", "--delta-start", "10",
                 "--alpha-start", "65", "--alpha-end", "6.5",
                 "--budgets", "20,40", "--seeds", "0,1", "--out", str(out)])
        assert main(args) == 0
        stdout = capsys.readouterr().out
        assert stdout.count("eps=") == 2
        with open(out / "summary.csv") as fh:
            lines = fh.read().strip().splitlines()
        assert lines[0] == "eps,mean_asr,std_asr,n"
        assert len(lines) == 3
        with open(out / "report.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert len(rows) == 5
        for eps in (20, 40):
            for seed in (0, 1):
                assert (out / ("eps%d-seed%d.bin" % (eps, seed))).exists()

    def test_bad_budget_list_exits_1(self, victim_file, tmp_path, capsys):
        args = (["sweep", "--victim", str(victim_file)] + BLOBS +
                ["--budgets", "ten", "--seeds", "0", "--out", str(tmp_path / "s")])
        assert main(args) == 1


class TestTopLevel:
    def test_no_subcommand_prints_help(self, capsys):
        assert main([]) == 1
        assert "train-victim" in capsys.readouterr().out

    def test_unknown_subcommand_exits_1(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 1

    def test_module_entry_point(self, tmp_path):
        result = subprocess.run(
            [sys.executable, "-m", "badge.cli", "train-victim", "--arch",
             "linear"] + BLOBS + ["--epochs", "2", "--out", str(tmp_path / "v.bin")],
            capture_output=True, text=True)
        assert result.returncode == 0
        assert "test_acc=" in result.stdout
