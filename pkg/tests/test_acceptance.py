"""Acceptance suite: one test per release criterion, at its stated tolerance.

Each test prints a single pass/fail line (visible with `pytest -s` or on
failure) so the whole gate reads as a checklist.
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest
from stub_server import run_stub

from dafte import learners, metrics, synthlab
from dafte.clients import FetchConfig, fetch_predictions, store_predictions
from dafte.cli import main as cli_main
from dafte.core import EnsembleWeights, FewShotSet, LabelSpace, validate_prediction_matrix
from dafte.ensemble import average_ensemble, weighted_ensemble
from dafte.metrics import LeepInputs, cost_of, leep

ROOT = Path(__file__).resolve().parent.parent
TOY = ROOT / "fixtures" / "toy"


def check(name: str, ok: bool, detail: str = "") -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {name}"
    if detail:
        line += f" ({detail})"
    print(line)
    assert ok, line


class TestAcceptance:
    def test_prop2_suite(self):
        """Average-ensemble loss <= mean member loss, 100/100 trials, < 10 s."""
        started = time.perf_counter()
        report = synthlab.verify_prop2(
            synthlab.SuiteConfig(seed=1, n_models=5), trials=100, slack=1e-12
        )
        elapsed = time.perf_counter() - started
        holds = sum(
            t.ce_margin >= -1e-12 and t.brier_margin >= -1e-12 for t in report.trials
        )
        strict = all(
            (t.ce_margin > 0 and t.brier_margin > 0) for t in report.trials if t.disagree
        )
        check(
            "average-ensemble guarantee (100 trials, CE + Brier)",
            holds == 100 and strict and report.all_ok and elapsed < 10.0,
            f"{holds}/100 trials, strict={strict}, {elapsed:.1f}s",
        )

    def test_uniform_weight_identity(self):
        """Uniform weighted ensemble == average ensemble, 1000 random matrices."""
        rng = np.random.default_rng(2024)
        worst = 0.0
        for _ in range(1000):
            n_models = int(rng.integers(1, 7))
            arity = int(rng.integers(2, 6))
            n = int(rng.integers(1, 9))
            preds = []
            for m in range(n_models):
                raw = rng.uniform(0.01, 1.0, size=(n, arity))
                preds.append(
                    validate_prediction_matrix(
                        raw / raw.sum(axis=1, keepdims=True),
                        LabelSpace(tuple(f"c{i}" for i in range(arity))),
                        model_id=f"m{m}",
                    )
                )
            uniform = EnsembleWeights.uniform(arity, n_models)
            diff = np.max(
                np.abs(weighted_ensemble(preds, uniform).rows - average_ensemble(preds).rows)
            )
            worst = max(worst, float(diff))
        check("uniform-weight identity (1000 matrices)", worst < 1e-12, f"max diff {worst:.2e}")

    def test_prop3_oracle_suite(self):
        """Oracle-weighted loss <= best member + one grid step, 20/20; with a
        zero-shift member the oracle sits within 0.02 CE of the fitted optimum."""
        started = time.perf_counter()
        report = synthlab.verify_prop3(
            synthlab.Prop3Config(seed=1, n_models=3, resolution=0.05, instances=20)
        )
        elapsed = time.perf_counter() - started
        oracle_ok = sum(
            inst.oracle_shots_ce <= inst.min_member_shots_ce + inst.eps_grid
            for inst in report.instances
        )
        corollary_ok = all(inst.gap_to_fft <= 0.02 for inst in report.instances)
        check(
            "weight-oracle guarantee (20 instances, res 0.05)",
            oracle_ok == 20 and corollary_ok and elapsed < 60.0,
            f"{oracle_ok}/20, max gap {max(i.gap_to_fft for i in report.instances):+.4f}, "
            f"{elapsed:.1f}s",
        )

    def test_fewshot_beats_zero_shot(self):
        """LR weighting at n=128 (20 seeds) >= zero-shot averaging; RF within
        2 accuracy points of LR."""
        rows = synthlab.compare_fewshot(
            synthlab.SuiteConfig(seed=7, n_models=5, n_train=200, n_test=1000),
            n_shots=128,
            seeds=20,
        )
        lr = float(np.mean([r.lr_accuracy for r in rows]))
        rf = float(np.mean([r.rf_accuracy for r in rows]))
        zero = float(np.mean([r.zero_shot_accuracy for r in rows]))
        check(
            "few-shot weighting vs zero-shot averaging (n=128, 20 seeds)",
            lr >= zero and abs(rf - lr) <= 0.02,
            f"lr {lr:.4f} rf {rf:.4f} zero-shot {zero:.4f}",
        )

    def test_leep_values(self):
        """Toy instance vs brute force at 1e-9; exact 0 and ln(1/K) cases."""
        toy = leep(
            LeepInputs(
                np.array([[0.9, 0.1], [0.8, 0.2], [0.3, 0.7], [0.1, 0.9]]),
                np.array([0, 0, 1, 1]),
                2,
            )
        )
        one_hot = leep(
            LeepInputs(np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([0, 1]), 2)
        )
        uniform = leep(LeepInputs(np.full((6, 3), 1.0 / 3), np.array([0, 1, 0, 1, 0, 1]), 2))
        ok = (
            abs(toy - (-0.3426157063690609)) < 1e-9
            and one_hot == 0.0
            and abs(uniform - math.log(0.5)) < 1e-12
        )
        check("LEEP toy/one-hot/uniform values", ok, f"toy {toy:.12f}")

    def test_cost_table_exact(self):
        """All five methods reproduce the cost formulas exactly on 10 random
        integer parameter sets."""
        rng = np.random.default_rng(77)
        ok = True
        for _ in range(10):
            n = int(rng.integers(0, 300))
            cf = int(rng.integers(1, 20))
            cb = int(rng.integers(0, 20))
            epochs = int(rng.integers(0, 10))
            n_models = int(rng.integers(1, 30))
            n_active = int(rng.integers(1, n_models + 1))
            cm = metrics.CostModel(
                c_forward=cf, c_backward=cb, epochs=epochs, n=n,
                n_models=n_models, n_active=n_active,
            )
            expected = {
                "ft": (n * (cf + cb) * epochs, cf),
                "da(ft)2": (n * (cf + cb) * epochs, cf),
                "daft-z": (0, cf),
                "daft-e-z": (0, n_models * cf),
                "daft-e": (n * (cf + epochs), n_active * cf),
            }
            for method, (train, infer) in expected.items():
                got = cost_of(method, cm)
                ok = ok and got["training_cost"] == train and got["inference_cost"] == infer
        check("cost table exact on 10 random parameter sets", ok)

    def test_soup_identity_and_comparison_csv(self, tmp_path):
        """Souping identical members is bit-exact; the heterogeneous suite
        emits a comparison CSV (no sign asserted)."""
        domain = synthlab.gen_domain(synthlab.DomainConfig(seed=13))
        member = synthlab.train_synthetic(domain, 100, seed=0)
        souped = synthlab.uniform_soup([member] * 5)
        x, _ = domain.sample(64, seed=1)
        identical = np.array_equal(souped.predict_rows(x), member.predict_rows(x))

        rows = synthlab.compare_soup(synthlab.SuiteConfig(seed=5, n_models=5), seeds=20)
        csv_path = tmp_path / "soup_vs_ensemble.csv"
        with open(csv_path, "w") as handle:
            synthlab.write_soup_csv(handle, rows)
        lines = csv_path.read_text().splitlines()
        csv_ok = len(lines) == 21 and lines[0] == "seed,soup_accuracy,ensemble_accuracy"
        check(
            "soup identity + comparison CSV (20 seeds)",
            identical and csv_ok,
            f"csv rows {len(lines) - 1}",
        )

    def test_concurrency_determinism(self, tmp_path):
        """Parallel and sequential fan-out byte-identical; RF parallel-by-tree
        bit-equal to sequential."""
        from dafte.clients import InferenceRequest

        request = InferenceRequest(
            model_id="stub",
            sample_ids=tuple(f"s{i}" for i in range(200)),
            inputs=tuple(f"sentence {i}" for i in range(200)),
        )
        space = LabelSpace(("neg", "pos"))
        with run_stub() as (endpoint, _):
            seq = fetch_predictions(endpoint, request, space,
                                    config=FetchConfig(batch_size=16, parallel=False))
            par = fetch_predictions(endpoint, request, space,
                                    config=FetchConfig(batch_size=16, parallel=True))
        a, b = tmp_path / "seq.jsonl", tmp_path / "par.jsonl"
        store_predictions(seq, a)
        store_predictions(par, b)
        fetch_ok = a.read_bytes() == b.read_bytes()

        rng = np.random.default_rng(3)
        raw = rng.uniform(0.05, 1.0, size=(48, 2))
        preds = [
            validate_prediction_matrix(
                raw / raw.sum(axis=1, keepdims=True), space, model_id=f"m{i}"
            )
            for i in range(3)
        ]
        shots = FewShotSet(tuple(str(i) for i in range(48)), rng.integers(0, 2, 48), 2)
        cfg = learners.RFConfig(seed=5, n_trees=40)
        seq_rf = learners.fit_rf(preds, shots, cfg, parallel=False)
        par_rf = learners.fit_rf(preds, shots, cfg, parallel=True)
        rf_ok = seq_rf.trees == par_rf.trees and np.array_equal(
            learners.predict_rf(seq_rf, preds).rows, learners.predict_rf(par_rf, preds).rows
        )
        check("concurrency determinism (fan-out + forest)", fetch_ok and rf_ok)

    def test_replay_reproduces_golden(self, tmp_path):
        """The shipped toy fixture reproduces its checked-in report byte for
        byte, twice over."""
        outs = []
        for name in ("one.json", "two.json"):
            out = tmp_path / name
            rc = cli_main(
                [
                    "ensemble-z",
                    "--registry", str(TOY / "registry.json"),
                    "--preds", str(TOY / "preds"),
                    "--test-labels", str(TOY / "test-labels.jsonl"),
                    "--dataset-tag", "toy",
                    "--out", str(out),
                ]
            )
            assert rc == 0
            outs.append(out.read_bytes())
        golden = (TOY / "golden_report.json").read_bytes()
        check(
            "replay path byte-exact vs golden report",
            outs[0] == golden and outs[1] == golden,
        )
