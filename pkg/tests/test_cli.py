"""CLI workflows: every subcommand, config precedence, byte-determinism."""

import json
import os

import numpy as np
import pytest

from uwbocc.cli import main
from uwbocc.dataset import read_manifest, write_cir
from uwbocc.evaluate import read_report
from uwbocc.nn import load_checkpoint

SIM = ["simulate", "--count", "breathing=6", "--count", "empty=6",
       "--n-fast", "16", "--m-slow", "24", "--seed", "3"]
TRAIN_FAST = ["--test-per-class", "0", "--empty-test", "0",
              "--reuse-occupied", "2", "--reuse-empty", "2", "--batch-size", "8",
              "--max-epochs", "2", "--patience", "1", "--quiet"]


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture()
def dataset(tmp_path):
    data = tmp_path / "data"
    assert run(*SIM, "--out", data) == 0
    return data


@pytest.fixture()
def checkpoint(dataset, tmp_path):
    path = tmp_path / "model.ckpt"
    assert run("train", "--data", dataset, "--out", path, *TRAIN_FAST) == 0
    return path


def tree_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


class TestSimulate:
    def test_writes_dataset(self, dataset):
        manifest = read_manifest(dataset / "manifest.json")
        assert len(manifest.records) == 12
        labels = [r.label.value for r in manifest.records]
        assert labels.count("breathing") == 6 and labels.count("empty") == 6

    def test_byte_identical_reruns(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run(*SIM, "--out", a) == 0
        assert run(*SIM, "--out", b) == 0
        assert tree_bytes(a) == tree_bytes(b)

    def test_seed_changes_payload(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run(*SIM[:-1], "1", "--out", a) == 0
        assert run(*SIM[:-1], "2", "--out", b) == 0
        assert tree_bytes(a) != tree_bytes(b)

    def test_requires_counts(self, tmp_path, capsys):
        assert run("simulate", "--out", tmp_path / "x") == 2
        assert "--count" in capsys.readouterr().err

    def test_env_var_supplies_out_dir(self, tmp_path, monkeypatch):
        target = tmp_path / "from-env"
        monkeypatch.setenv("UWBOCC_DATA_DIR", str(target))
        assert run(*SIM) == 0
        assert (target / "manifest.json").exists()

    def test_missing_out_dir_is_config_error(self, monkeypatch, capsys):
        monkeypatch.delenv("UWBOCC_DATA_DIR", raising=False)
        assert run(*SIM) == 2
        assert "UWBOCC_DATA_DIR" in capsys.readouterr().err


class TestImport:
    def make_recording(self, tmp_path, m=96):
        rng = np.random.default_rng(0)
        rec = tmp_path / "session.cir"
        data = rng.standard_normal((16, m)) + 1j * rng.standard_normal((16, m))
        write_cir(rec, data)
        return rec

    def test_segments_into_dataset(self, tmp_path):
        rec = self.make_recording(tmp_path)
        out = tmp_path / "imported"
        assert run("import", rec, "--label", "talking", "--car", "car1",
                   "--participant", "p01", "--seat", "front",
                   "--window", "2.4", "--out", out) == 0
        manifest = read_manifest(out / "manifest.json")
        assert len(manifest.records) == 4  # 96 columns, 24 per 2.4 s window
        assert all(r.label.value == "talking" for r in manifest.records)
        assert [r.segment_index for r in manifest.records] == list(range(4))

    def test_append_grows_dataset(self, tmp_path):
        rec = self.make_recording(tmp_path)
        out = tmp_path / "imported"
        common = ["--window", "2.4", "--out", out]
        assert run("import", rec, "--label", "talking", "--car", "car1",
                   "--participant", "p01", *common) == 0
        assert run("import", rec, "--label", "empty", "--car", "car2",
                   "--append", *common) == 0
        manifest = read_manifest(out / "manifest.json")
        assert len(manifest.records) == 8
        assert {r.label.value for r in manifest.records} == {"talking", "empty"}

    def test_window_mismatch_on_append(self, tmp_path, capsys):
        rec = self.make_recording(tmp_path)
        out = tmp_path / "imported"
        assert run("import", rec, "--label", "talking", "--car", "car1",
                   "--participant", "p01", "--window", "2.4", "--out", out) == 0
        assert run("import", rec, "--label", "empty", "--car", "car2",
                   "--window", "4.8", "--out", out, "--append") == 3
        assert "do not match" in capsys.readouterr().err

    def test_fractional_window_rejected(self, tmp_path):
        rec = self.make_recording(tmp_path)
        assert run("import", rec, "--label", "empty", "--car", "car2",
                   "--window", "2.45", "--out", tmp_path / "x") == 2

    def test_corrupt_recording(self, tmp_path):
        bad = tmp_path / "bad.cir"
        bad.write_bytes(b"nonsense")
        assert run("import", bad, "--label", "empty", "--car", "car2",
                   "--out", tmp_path / "x") == 3


class TestTrain:
    def test_writes_checkpoint_with_metadata(self, checkpoint):
        network, extra = load_checkpoint(checkpoint)
        assert network.variant.name == "1D-E"
        assert extra["reference_energy"] > 0
        assert 0.0 <= extra["best_val_auc"] <= 1.0
        assert extra["epochs_run"] <= 2

    def test_byte_identical_reruns(self, dataset, tmp_path):
        a, b = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        assert run("train", "--data", dataset, "--out", a, *TRAIN_FAST) == 0
        assert run("train", "--data", dataset, "--out", b, *TRAIN_FAST) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_creates_missing_output_directory(self, dataset, tmp_path):
        out = tmp_path / "models" / "nested" / "m.ckpt"
        assert run("train", "--data", dataset, "--out", out, *TRAIN_FAST) == 0
        assert out.exists()

    def test_insufficient_split_is_data_error(self, dataset, capsys):
        assert run("train", "--data", dataset, "--out", "/tmp/never.ckpt",
                   "--test-per-class", "150") == 3
        assert "insufficient" in capsys.readouterr().err

    def test_unknown_variant_rejected_by_parser(self, dataset):
        with pytest.raises(SystemExit) as exc:
            run("train", "--data", dataset, "--out", "/tmp/never.ckpt",
                "--variant", "9D-Z", *TRAIN_FAST)
        assert exc.value.code == 2

    def test_config_file_supplies_defaults_and_flags_win(self, dataset, tmp_path):
        config = tmp_path / "train.json"
        config.write_text(json.dumps({
            "test-per-class": 0, "empty-test": 0, "reuse-occupied": 2,
            "reuse-empty": 2, "batch-size": 8, "max-epochs": 5,
            "patience": 1, "quiet": True}))
        out = tmp_path / "cfg.ckpt"
        assert run("train", "--data", dataset, "--out", out,
                   "--config", config, "--max-epochs", "1") == 0
        _, extra = load_checkpoint(out)
        assert extra["epochs_run"] == 1  # the explicit flag beat the config's 5

    def test_unknown_config_key(self, dataset, tmp_path, capsys):
        config = tmp_path / "bad.json"
        config.write_text(json.dumps({"max-epoch": 1}))
        assert run("train", "--data", dataset, "--out", "/tmp/never.ckpt",
                   "--config", config) == 2
        assert "max-epoch" in capsys.readouterr().err


class TestEvaluate:
    def test_resnet_report(self, dataset, checkpoint, tmp_path):
        out = tmp_path / "report.json"
        csv = tmp_path / "report.csv"
        assert run("evaluate", "--data", dataset, "--model", checkpoint,
                   "--eval-grid=-10,-30", "--out", out, "--csv", csv) == 0
        report = read_report(out)
        assert len(report.rows) == 2
        assert {r.snr_db for r in report.rows} == {-10.0, -30.0}
        assert report.rows[0].name == "1D-E"
        assert csv.read_text().splitlines()[0].startswith("name,activity")

    def test_resnet_needs_model(self, dataset, tmp_path):
        assert run("evaluate", "--data", dataset,
                   "--out", tmp_path / "r.json") == 2

    def test_baseline_detectors(self, dataset, tmp_path):
        for detector in ("energy", "fft"):
            out = tmp_path / f"{detector}.json"
            assert run("evaluate", "--data", dataset, "--detector", detector,
                       "--eval-grid=-10", "--energy-window", "4",
                       "--out", out) == 0
            assert read_report(out).rows[0].name == detector

    def test_byte_identical_across_threads(self, dataset, checkpoint, tmp_path):
        outs = []
        for tag, threads in (("a", 1), ("b", 1), ("c", 4)):
            out = tmp_path / f"{tag}.json"
            assert run("evaluate", "--data", dataset, "--model", checkpoint,
                       "--eval-grid=-10,-20,-30", "--threads", threads,
                       "--out", out) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1] == outs[2]

    def test_grid_colon_syntax(self, dataset, checkpoint, tmp_path):
        out = tmp_path / "grid.json"
        assert run("evaluate", "--data", dataset, "--model", checkpoint,
                   "--eval-grid=-10:-20:3", "--out", out) == 0
        assert {r.snr_db for r in read_report(out).rows} == {-10.0, -15.0, -20.0}

    def test_bad_grid(self, dataset, checkpoint, tmp_path, capsys):
        assert run("evaluate", "--data", dataset, "--model", checkpoint,
                   "--eval-grid=lots", "--out", tmp_path / "r.json") == 2
        assert "eval-grid" in capsys.readouterr().err

    def test_reference_energy_flag_changes_report(self, dataset, checkpoint, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert run("evaluate", "--data", dataset, "--model", checkpoint,
                   "--eval-grid", "-20", "--out", a) == 0
        assert run("evaluate", "--data", dataset, "--model", checkpoint,
                   "--eval-grid", "-20", "--reference-energy", "1e6", "--out", b) == 0
        assert read_report(a).config["reference_energy"] != \
            read_report(b).config["reference_energy"]

    def test_missing_dataset(self, tmp_path, checkpoint):
        assert run("evaluate", "--data", tmp_path / "nowhere",
                   "--model", checkpoint, "--out", tmp_path / "r.json") == 3


class TestAblate:
    def test_missing_variants_without_flag(self, dataset, checkpoint, tmp_path):
        models = tmp_path / "models"
        models.mkdir()
        (models / "1D-E.ckpt").write_bytes(checkpoint.read_bytes())
        assert run("ablate", "--data", dataset, "--models", models,
                   "--out", tmp_path / "r.json") == 3

    def test_allow_missing_with_baselines(self, dataset, checkpoint, tmp_path):
        models = tmp_path / "models"
        models.mkdir()
        (models / "1D-E.ckpt").write_bytes(checkpoint.read_bytes())
        out = tmp_path / "ablation.json"
        assert run("ablate", "--data", dataset, "--models", models,
                   "--allow-missing", "--include-baselines",
                   "--energy-window", "4", "--out", out) == 0
        report = read_report(out)
        names = {r.name for r in report.rows}
        assert names == {"1D-E", "energy", "fft"}
        # breathing is the only occupied activity here, so one anchor each
        assert len(report.rows) == 3

    def test_empty_models_dir(self, dataset, tmp_path):
        models = tmp_path / "models"
        models.mkdir()
        assert run("ablate", "--data", dataset, "--models", models,
                   "--allow-missing", "--out", tmp_path / "r.json") == 3


class TestReport:
    def make_report(self, dataset, checkpoint, tmp_path):
        out = tmp_path / "report.json"
        assert run("evaluate", "--data", dataset, "--model", checkpoint,
                   "--eval-grid=-10,-20", "--out", out) == 0
        return out

    def test_text_table(self, dataset, checkpoint, tmp_path, capsys):
        path = self.make_report(dataset, checkpoint, tmp_path)
        assert run("report", path) == 0
        output = capsys.readouterr().out
        assert "detector" in output and "1D-E" in output
        assert "reference points" in output  # the -20 dB row triggers the footer

    def test_csv_conversion_round_trip(self, dataset, checkpoint, tmp_path):
        path = self.make_report(dataset, checkpoint, tmp_path)
        csv1, csv2 = tmp_path / "one.csv", tmp_path / "two.csv"
        assert run("report", path, "--format", "csv", "--out", csv1) == 0
        assert run("evaluate", "--data", dataset, "--model", checkpoint,
                   "--eval-grid=-10,-20", "--out", tmp_path / "again.json",
                   "--csv", csv2) == 0
        assert csv1.read_bytes() == csv2.read_bytes()

    def test_csv_needs_out(self, dataset, checkpoint, tmp_path):
        path = self.make_report(dataset, checkpoint, tmp_path)
        assert run("report", path, "--format", "csv") == 2

    def test_series_output(self, dataset, checkpoint, tmp_path, capsys):
        path = self.make_report(dataset, checkpoint, tmp_path)
        capsys.readouterr()  # drop the evaluate command's progress line
        assert run("report", path, "--series", "snr_db") == 0
        series = json.loads(capsys.readouterr().out)
        assert series["1D-E/breathing"]["x"] == [-20.0, -10.0]

    def test_malformed_report(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{}")
        assert run("report", bad) == 3
