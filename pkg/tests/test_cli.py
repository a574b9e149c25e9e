"""End-to-end command-line behavior against the shipped fixtures."""

import json
from pathlib import Path

import pytest

from dafte.cli import main

ROOT = Path(__file__).resolve().parent.parent
TOY = ROOT / "fixtures" / "toy"
DOMINANT = ROOT / "fixtures" / "dominant"
LEEP_FIXTURE = ROOT / "fixtures" / "leep"


def run(*argv):
    return main([str(a) for a in argv])


class TestEnsembleZ:
    def test_toy_fixture_reproduces_golden_bytes(self, tmp_path):
        out = tmp_path / "report.json"
        rc = run(
            "ensemble-z",
            "--registry", TOY / "registry.json",
            "--preds", TOY / "preds",
            "--test-labels", TOY / "test-labels.jsonl",
            "--dataset-tag", "toy",
            "--out", out,
        )
        assert rc == 0
        assert out.read_bytes() == (TOY / "golden_report.json").read_bytes()

    def test_runs_are_deterministic(self, tmp_path):
        outs = []
        for name in ("a.json", "b.json"):
            out = tmp_path / name
            run(
                "ensemble-z",
                "--registry", TOY / "registry.json",
                "--preds", TOY / "preds",
                "--test-labels", TOY / "test-labels.jsonl",
                "--dataset-tag", "toy",
                "--out", out,
            )
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_single_model_registry_equals_model(self, tmp_path):
        registry = tmp_path / "registry.json"
        registry.write_text(
            json.dumps(
                {
                    "format": "dafte-registry/1",
                    "classes": ["neg", "pos"],
                    "models": [{"id": "m1", "backend": "file:m1.jsonl",
                                "classes": ["neg", "pos"]}],
                }
            )
        )
        out = tmp_path / "report.json"
        rc = run(
            "ensemble-z",
            "--registry", registry,
            "--preds", TOY / "preds",
            "--test-labels", TOY / "test-labels.jsonl",
            "--out", out,
        )
        assert rc == 0
        payload = json.loads(out.read_text())
        assert payload["methods"]["daft-e-z"]["accuracy"] == payload["methods"]["m1"]["accuracy"]

    def test_missing_prediction_file_names_model(self, tmp_path, capsys):
        registry = tmp_path / "registry.json"
        registry.write_text(
            json.dumps(
                {
                    "format": "dafte-registry/1",
                    "classes": ["neg", "pos"],
                    "models": [{"id": "ghost", "backend": "file:ghost.jsonl",
                                "classes": ["neg", "pos"]}],
                }
            )
        )
        rc = run(
            "ensemble-z",
            "--registry", registry,
            "--preds", TOY / "preds",
            "--test-labels", TOY / "test-labels.jsonl",
            "--out", tmp_path / "r.json",
        )
        assert rc != 0
        assert "ghost" in capsys.readouterr().err


class TestEnsembleFit:
    def test_lr_fit_is_byte_deterministic(self, tmp_path):
        outs = []
        for name in ("w1.json", "w2.json"):
            out = tmp_path / name
            rc = run(
                "ensemble-fit",
                "--registry", DOMINANT / "registry.json",
                "--preds", DOMINANT / "train",
                "--shots", DOMINANT / "shots.jsonl",
                "--learner", "lr",
                "--seed", 7,
                "--out", out,
            )
            assert rc == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_rf_fit_is_byte_deterministic(self, tmp_path):
        outs = []
        for name in ("f1.json", "f2.json"):
            out = tmp_path / name
            rc = run(
                "ensemble-fit",
                "--registry", DOMINANT / "registry.json",
                "--preds", DOMINANT / "train",
                "--shots", DOMINANT / "shots.jsonl",
                "--learner", "rf",
                "--seed", 7,
                "--trees", 20,
                "--out", out,
            )
            assert rc == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_empty_shots_error(self, tmp_path, capsys):
        shots = tmp_path / "shots.jsonl"
        shots.write_text("")
        rc = run(
            "ensemble-fit",
            "--registry", DOMINANT / "registry.json",
            "--preds", DOMINANT / "train",
            "--shots", shots,
            "--learner", "lr",
            "--out", tmp_path / "w.json",
        )
        assert rc != 0
        assert "no shots" in capsys.readouterr().err

    def test_weighted_eval_beats_zero_shot_on_dominant_fixture(self, tmp_path):
        """Fit on the shots split, evaluate held out; weighting must not lose."""
        weights = tmp_path / "weights.json"
        rc = run(
            "ensemble-fit",
            "--registry", DOMINANT / "registry.json",
            "--preds", DOMINANT / "train",
            "--shots", DOMINANT / "shots.jsonl",
            "--learner", "lr",
            "--seed", 0,
            "--out", weights,
        )
        assert rc == 0
        report = tmp_path / "report.json"
        rc = run(
            "eval",
            "--registry", DOMINANT / "registry.json",
            "--preds", DOMINANT / "test",
            "--test-labels", DOMINANT / "test-labels.jsonl",
            "--weights", weights,
            "--out", report,
        )
        assert rc == 0
        payload = json.loads(report.read_text())
        assert (
            payload["methods"]["daft-e-lr"]["accuracy"]
            >= payload["methods"]["daft-e-z"]["accuracy"]
        )

    def test_sample_n_subsamples_with_seed(self, tmp_path):
        out_a = tmp_path / "a.json"
        out_b = tmp_path / "b.json"
        for out in (out_a, out_b):
            rc = run(
                "ensemble-fit",
                "--registry", DOMINANT / "registry.json",
                "--preds", DOMINANT / "train",
                "--shots", DOMINANT / "shots.jsonl",
                "--learner", "lr",
                "--seed", 3,
                "--sample-n", 16,
                "--out", out,
            )
            assert rc == 0
        assert out_a.read_bytes() == out_b.read_bytes()
        report = json.loads((tmp_path / "a.json.report.json").read_text())
        assert report["n_shots"] == 16
        assert report["seed"] == 3


class TestMetricsCommands:
    def test_cost_example(self, capsys):
        rc = run("cost", "--method", "daft-e-z", "--N", 15, "--cf", 1)
        assert rc == 0
        out = capsys.readouterr().out
        assert "training 0" in out
        assert "inference 15" in out

    def test_cost_ft(self, capsys):
        rc = run("cost", "--method", "ft", "--n", 8, "--cf", 1, "--cb", 2, "--epochs", 3)
        assert rc == 0
        out = capsys.readouterr().out
        assert "training 72" in out
        assert "inference 1" in out

    def test_leep_fixture_prints_derived_value(self, capsys):
        rc = run(
            "leep",
            "--source-preds", LEEP_FIXTURE / "source.jsonl",
            "--labels", LEEP_FIXTURE / "labels.jsonl",
            "--target-arity", 2,
        )
        assert rc == 0
        printed = capsys.readouterr().out.strip()
        assert printed.startswith("leep ")
        assert float(printed.split()[1]) == pytest.approx(-0.3426157063690609, abs=1e-9)

    def test_heatmap_pivot(self, tmp_path):
        report = tmp_path / "eval.json"
        rc = run(
            "ensemble-z",
            "--registry", TOY / "registry.json",
            "--preds", TOY / "preds",
            "--test-labels", TOY / "test-labels.jsonl",
            "--dataset-tag", "toy",
            "--out", report,
        )
        assert rc == 0
        out = tmp_path / "heat.csv"
        rc = run("heatmap", "--registry", TOY / "registry.json",
                 "--reports", report, "--out", out)
        assert rc == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "source\\target,toy"
        assert lines[1].startswith("reviews,0.75")


class TestFetch:
    def test_fetch_writes_prediction_file(self, tmp_path, monkeypatch):
        from stub_server import run_stub

        inputs = tmp_path / "inputs.jsonl"
        inputs.write_text(
            '{"id": "a", "text": "great stuff"}\n{"id": "b", "text": "awful stuff"}\n'
        )
        out = tmp_path / "preds.jsonl"
        monkeypatch.setenv("DAFTE_CACHE_DIR", str(tmp_path / "cache"))
        with run_stub() as (endpoint, calls):
            rc = run(
                "fetch",
                "--endpoint", endpoint,
                "--model-id", "stub",
                "--inputs", inputs,
                "--classes", "neg", "pos",
                "--out", out,
            )
            assert rc == 0
            assert sum(calls) == 2
            # second run is served from the env-configured cache
            out2 = tmp_path / "preds2.jsonl"
            rc = run(
                "fetch",
                "--endpoint", endpoint,
                "--model-id", "stub",
                "--inputs", inputs,
                "--classes", "neg", "pos",
                "--out", out2,
            )
            assert rc == 0
            assert sum(calls) == 2
        assert out.read_bytes() == out2.read_bytes()
        from dafte.clients import load_predictions
        from dafte.core import LabelSpace

        pred = load_predictions(out, LabelSpace(("neg", "pos")))
        assert pred.ids() == ("a", "b")


class TestSynthVerify:
    def test_prop2_exits_zero(self, tmp_path, capsys):
        out = tmp_path / "report.json"
        csv_out = tmp_path / "margins.csv"
        rc = run("synth-verify", "--prop", 2, "--trials", 5, "--seed", 1,
                 "--out", out, "--csv", csv_out)
        assert rc == 0
        assert "prop2 ok" in capsys.readouterr().out
        assert json.loads(out.read_text())["all_ok"] is True
        assert csv_out.read_text().startswith("trial,")

    def test_prop3_exits_zero(self, tmp_path, capsys):
        rc = run("synth-verify", "--prop", 3, "--instances", 2, "--seed", 1)
        assert rc == 0
        assert "prop3 ok" in capsys.readouterr().out

    def test_suite_config_file(self, tmp_path, capsys):
        config = tmp_path / "suite.json"
        config.write_text(json.dumps({"seed": 2, "n_models": 3, "shift": 0.5}))
        rc = run("synth-verify", "--prop", 2, "--trials", 3, "--config", config)
        assert rc == 0
        assert "prop2 ok" in capsys.readouterr().out

    def test_bad_config_field_rejected(self, tmp_path, capsys):
        config = tmp_path / "suite.json"
        config.write_text(json.dumps({"seed": 2, "bogus_knob": 1}))
        rc = run("synth-verify", "--prop", 2, "--trials", 1, "--config", config)
        assert rc != 0
        assert "bogus_knob" in capsys.readouterr().err
