import json

import numpy as np
import pytest

from corpus import write_corpus
from gridsight.cli import run
from gridsight.manifest import read_manifest, write_manifest


@pytest.fixture(scope="module")
def pipeline_dir(tmp_path_factory):
    """One small fetched+featurized+trained pipeline shared by CLI tests."""
    root = tmp_path_factory.mktemp("pipeline")
    records = write_corpus(root / "imgs", n_per_class=6, seed=0)
    write_manifest(root / "manifest.jsonl", records)

    code = run(
        [
            "featurize",
            "--manifest",
            str(root / "manifest.jsonl"),
            "--out",
            str(root / "features"),
            "--seed",
            "3",
        ]
    )
    assert code == 0
    code = run(
        [
            "train",
            "--features",
            str(root / "features"),
            "--out",
            str(root / "run"),
            "--preset",
            "smallnet",
            "--seed",
            "3",
            "--epochs",
            "2",
        ]
    )
    assert code == 0
    return root


class TestUsageErrors:
    def test_unknown_subcommand_exit_1(self, capsys):
        assert run(["frobnicate"]) == 1

    def test_missing_required_input_exit_1(self):
        assert run(["featurize"]) == 1

    def test_help_exits_zero(self):
        assert run(["--help"]) == 0

    def test_runtime_failure_exit_2(self, tmp_path):
        (tmp_path / "manifest.jsonl").write_text("")
        code = run(["featurize", "--manifest", str(tmp_path / "manifest.jsonl"), "--out", str(tmp_path / "f")])
        assert code == 2

    def test_subcommand_help(self, capsys):
        assert run(["train", "--help"]) == 0
        out = capsys.readouterr().out
        assert "--preset" in out


class TestFeaturize:
    def test_outputs_are_complete(self, pipeline_dir):
        features = pipeline_dir / "features"
        records = read_manifest(features / "manifest.jsonl")
        assert len(records) == 36  # 18 originals + mirrors
        assert (features / "stats.json").exists()
        blobs = list(features.glob("*.f32"))
        assert len(blobs) == 36

    def test_splits_assigned(self, pipeline_dir):
        records = read_manifest(pipeline_dir / "features" / "manifest.jsonl")
        assert {r.split for r in records} == {"train", "dev", "test"}


class TestTrainEvaluate:
    def test_metrics_and_checkpoints(self, pipeline_dir):
        run_dir = pipeline_dir / "run"
        lines = (run_dir / "metrics.jsonl").read_text().strip().splitlines()
        assert len(lines) == 2
        assert (run_dir / "checkpoints" / "epoch0000.ckpt").exists()

    def test_train_deterministic_metrics(self, pipeline_dir, tmp_path):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        for out in (out_a, out_b):
            code = run(
                [
                    "train",
                    "--features",
                    str(pipeline_dir / "features"),
                    "--out",
                    str(out),
                    "--seed",
                    "7",
                    "--epochs",
                    "2",
                ]
            )
            assert code == 0
        assert (out_a / "metrics.jsonl").read_bytes() == (out_b / "metrics.jsonl").read_bytes()

    def test_evaluate_writes_report_with_split_total(self, pipeline_dir, tmp_path):
        report_path = tmp_path / "report.json"
        code = run(
            [
                "evaluate",
                "--features",
                str(pipeline_dir / "features"),
                "--split",
                "test",
                "--checkpoint",
                str(pipeline_dir / "run" / "checkpoints" / "epoch0001.ckpt"),
                "--out",
                str(report_path),
            ]
        )
        assert code == 0
        report = json.loads(report_path.read_text())
        n_test = sum(1 for r in read_manifest(pipeline_dir / "features" / "manifest.jsonl") if r.split == "test")
        assert int(np.sum(report["confusion"])) == n_test
        assert len(report["per_class_accuracy"]) == 3

    def test_ensemble_selects_and_reports(self, pipeline_dir, tmp_path):
        report_path = tmp_path / "ens.json"
        code = run(
            [
                "ensemble",
                "--features",
                str(pipeline_dir / "features"),
                "--metrics",
                str(pipeline_dir / "run" / "metrics.jsonl"),
                "--split",
                "dev",
                "--k",
                "2",
                "--min-gap",
                "1",
                "--out",
                str(report_path),
            ]
        )
        assert code == 0
        report = json.loads(report_path.read_text())
        assert len(report["ensemble_epochs"]) == 2


class TestFeatureDumpAndSalience:
    def test_dump_features_blank_image(self, tmp_path):
        from gridsight.images import save_png

        blank = tmp_path / "blank.png"
        save_png(blank, np.full((64, 64, 3), 140.0))
        out = tmp_path / "dump"
        assert run(["dump-features", "--image", str(blank), "--out", str(out)]) == 0
        from gridsight.images import load_image

        hog = load_image(out / "hog.png")
        hough = load_image(out / "hough.png")
        assert hog.max() == 0 and hough.max() == 0
        assert (out / "edges.png").exists()
        assert (out / "hough_accumulator.png").exists()

    def test_salience_writes_png(self, pipeline_dir, tmp_path):
        img = next(iter((pipeline_dir / "imgs").glob("cls2_*.png")))
        out = tmp_path / "sal.png"
        code = run(
            [
                "salience",
                "--checkpoint",
                str(pipeline_dir / "run" / "checkpoints" / "epoch0001.ckpt"),
                "--image",
                str(img),
                "--stats",
                str(pipeline_dir / "features" / "stats.json"),
                "--out",
                str(out),
                "--class",
                "2",
            ]
        )
        assert code == 0
        assert out.exists()


class TestConfigFile:
    def test_config_drives_featurize_and_flags_override(self, tmp_path):
        records = write_corpus(tmp_path / "imgs", n_per_class=3, seed=1)
        write_manifest(tmp_path / "m.jsonl", records)
        config = {
            "featurize": {
                "manifest": str(tmp_path / "m.jsonl"),
                "out": str(tmp_path / "cfg_features"),
                "seed": 5,
            }
        }
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(json.dumps(config))
        assert run(["featurize", "--config", str(cfg_path)]) == 0
        assert (tmp_path / "cfg_features" / "stats.json").exists()

        override_out = tmp_path / "override"
        assert run(["featurize", "--config", str(cfg_path), "--out", str(override_out)]) == 0
        assert (override_out / "stats.json").exists()


class TestFetchCommand:
    def test_fixture_fetch_builds_manifest(self, tmp_path):
        from gridsight.images import save_png

        fixdir = tmp_path / "fixtures"
        fixdir.mkdir()
        for i in range(3):
            save_png(fixdir / f"f{i}.png", np.full((32, 32, 3), 60.0 + i))
        streets = [
            {"start": [37.0, -122.0], "end": [37.001, -122.0], "interval": 30.0, "label": 1},
        ]
        streets_path = tmp_path / "streets.json"
        streets_path.write_text(json.dumps(streets))
        out = tmp_path / "data"
        code = run(
            ["fetch", "--streets", str(streets_path), "--fixtures", str(fixdir), "--out", str(out), "--jobs", "1"]
        )
        assert code == 0
        records = read_manifest(out / "manifest.jsonl")
        assert len(records) >= 4
        assert all(r.label == 1 for r in records)
        assert json.loads((out / "fetch_failures.json").read_text()) == []
