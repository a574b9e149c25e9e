"""Command-line surface: batch ensembling, weight fitting, metrics, harnesses.

Every command is deterministic given its flags (and --seed where sampling is
involved); all machine-readable outputs carry a format tag.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import clients, learners, metrics, synthlab
from .core import EvalReport, FewShotSet, LabelSpace, PredictionMatrix, Registry
from .core import align_rows_to_ids, map_outputs
from .ensemble import average_ensemble, weighted_ensemble
from .errors import DafteError, ParseError
from .metrics import COST_METHODS, CostModel

FIT_REPORT_FORMAT = "dafte-fit-report/1"
LEEP_REPORT_FORMAT = "dafte-leep/1"


def _dump_json(payload: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _load_mapped(registry: Registry, preds_dir: str | Path) -> list[PredictionMatrix]:
    """Load each member's prediction file and map it onto the target space."""
    mapped = []
    for model in registry.models:
        path = clients.prediction_path(model, preds_dir)
        if not path.exists():
            raise ParseError(f"model {model.id!r}: prediction file {path} not found")
        native = clients.load_predictions(path, model.label_space)
        mapped.append(map_outputs(native, model.mapping))
    ids = mapped[0].ids()
    for pred in mapped[1:]:
        if pred.ids() != ids:
            raise ParseError(
                f"model {pred.model_id!r}: sample ids disagree with {mapped[0].model_id!r}"
            )
    return mapped


def _gold_for(pred: PredictionMatrix, labels: dict[str, int]) -> np.ndarray:
    gold = []
    for sid in pred.ids():
        if sid not in labels:
            raise ParseError(f"no gold label for sample id {sid!r}")
        gold.append(labels[sid])
    return np.asarray(gold, dtype=np.int64)


def _base_report(preds: list[PredictionMatrix], gold: np.ndarray, metadata: dict) -> EvalReport:
    report = EvalReport(metadata=metadata)
    ens = average_ensemble(preds)
    for pred in preds:
        report.add_method(pred.model_id, metrics.accuracy(pred, gold),
                          metrics.cross_entropy(pred, gold))
    report.add_method("daft-e-z", metrics.accuracy(ens, gold), metrics.cross_entropy(ens, gold))
    return report


def _add_ri_vs_ensemble(report: EvalReport) -> None:
    base = report.accuracy["daft-e-z"]
    for name in report.accuracy:
        if name == "daft-e-z":
            continue
        report.add_ri(name, "daft-e-z", metrics.relative_improvement(report.accuracy[name], base))


def cmd_ensemble_z(args: argparse.Namespace) -> int:
    registry = clients.load_registry(args.registry)
    preds = _load_mapped(registry, args.preds)
    labels = clients.load_labels(args.test_labels)
    gold = _gold_for(preds[0], labels)
    metadata = {"seed": None, "n": int(gold.shape[0]), "dataset": args.dataset_tag}
    report = _base_report(preds, gold, metadata)
    _add_ri_vs_ensemble(report)
    Path(args.out).write_text(report.to_json())
    if args.text:
        sys.stdout.write(report.to_text())
    return 0


def cmd_ensemble_fit(args: argparse.Namespace) -> int:
    registry = clients.load_registry(args.registry)
    preds = _load_mapped(registry, args.preds)
    shots = clients.load_shots(args.shots, registry.label_space.arity)
    if args.sample_n is not None:
        rng = np.random.default_rng(args.seed)
        picks = np.sort(rng.choice(shots.n, size=min(args.sample_n, shots.n), replace=False))
        shots = FewShotSet(
            sample_ids=tuple(shots.sample_ids[i] for i in picks),
            labels=shots.labels[picks],
            arity=shots.arity,
        )
    shot_preds = []
    for pred in preds:
        idx = align_rows_to_ids(pred, shots.sample_ids)
        shot_preds.append(
            PredictionMatrix(
                model_id=pred.model_id,
                rows=pred.rows[idx],
                label_space=pred.label_space,
                sample_ids=shots.sample_ids,
            )
        )
    if args.learner == "lr":
        cfg = learners.LRConfig(max_iter=args.max_iter, learning_rate=args.learning_rate,
                                seed=args.seed)
        weights = learners.fit_lr(shot_preds, shots, cfg)
        learners.save_weights(weights, args.out)
        fitted = weighted_ensemble(shot_preds, weights)
    else:
        cfg = learners.RFConfig(n_trees=args.trees, max_depth=args.depth, seed=args.seed)
        forest = learners.fit_rf(shot_preds, shots, cfg)
        learners.save_forest(forest, args.out)
        fitted = learners.predict_rf(forest, shot_preds)
    report = {
        "format": FIT_REPORT_FORMAT,
        "learner": args.learner,
        "seed": args.seed,
        "n_shots": shots.n,
        "n_models": len(preds),
        "train_accuracy": metrics.accuracy(fitted, shots.labels),
        "train_cross_entropy": metrics.cross_entropy(fitted, shots.labels),
    }
    _dump_json(report, str(args.out) + ".report.json")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    registry = clients.load_registry(args.registry)
    preds = _load_mapped(registry, args.preds)
    labels = clients.load_labels(args.test_labels)
    gold = _gold_for(preds[0], labels)
    metadata = {"seed": None, "n": int(gold.shape[0]), "dataset": args.dataset_tag}
    report = _base_report(preds, gold, metadata)
    if args.weights:
        fitted = weighted_ensemble(preds, learners.load_weights(args.weights))
        report.add_method("daft-e-lr", metrics.accuracy(fitted, gold),
                          metrics.cross_entropy(fitted, gold))
    if args.forest:
        fitted = learners.predict_rf(learners.load_forest(args.forest), preds)
        report.add_method("daft-e-rf", metrics.accuracy(fitted, gold),
                          metrics.cross_entropy(fitted, gold))
    _add_ri_vs_ensemble(report)
    Path(args.out).write_text(report.to_json())
    if args.text:
        sys.stdout.write(report.to_text())
    return 0


def cmd_heatmap(args: argparse.Namespace) -> int:
    registry = clients.load_registry(args.registry)
    source_of = {m.id: m.source_dataset_tag for m in registry.models}
    sums: dict[tuple[str, str], list[float]] = {}
    for report_path in args.reports:
        payload = json.loads(Path(report_path).read_text())
        target = payload.get("metadata", {}).get("dataset") or Path(report_path).stem
        for name, values in payload.get("methods", {}).items():
            if name not in source_of:
                continue
            sums.setdefault((source_of[name], target), []).append(values["accuracy"])
    cells = {pair: float(np.mean(v)) for pair, v in sums.items()}
    with open(args.out, "w") as handle:
        metrics.write_heatmap_csv(handle, cells)
    return 0


def cmd_leep(args: argparse.Namespace) -> int:
    header = json.loads(Path(args.source_preds).read_text().splitlines()[0])
    source_space = LabelSpace(tuple(header["classes"]))
    pred = clients.load_predictions(args.source_preds, source_space)
    labels = clients.load_labels(args.labels)
    gold = _gold_for(pred, labels)
    arity = args.target_arity if args.target_arity else int(gold.max()) + 1
    value = metrics.leep(metrics.LeepInputs(pred.rows, gold, arity))
    sys.stdout.write(f"leep {value!r}\n")
    if args.out:
        _dump_json({"format": LEEP_REPORT_FORMAT, "leep": value, "n": pred.n,
                    "target_arity": arity}, args.out)
    return 0


def cmd_fetch(args: argparse.Namespace) -> int:
    ids: list[str] = []
    texts: list[str] = []
    for line in Path(args.inputs).read_text().splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        ids.append(str(record["id"]))
        texts.append(str(record["text"]))
    if not ids:
        raise ParseError(f"{args.inputs}: no input records")
    space = LabelSpace(tuple(args.classes))
    request = clients.InferenceRequest(
        model_id=args.model_id, sample_ids=tuple(ids), inputs=tuple(texts)
    )
    cache = None
    if not args.no_cache:
        cache_dir = Path(args.cache_dir) if args.cache_dir else clients.default_cache_dir()
        cache = clients.PredictionCache(cache_dir)
    config = clients.FetchConfig(
        batch_size=args.batch_size,
        timeout_s=args.timeout,
        retries=args.retries,
        parallel=not args.sequential,
        max_in_flight=args.max_in_flight,
    )
    pred = clients.fetch_predictions(args.endpoint, request, space, cache=cache, config=config)
    clients.store_predictions(pred, args.out)
    return 0


def cmd_cost(args: argparse.Namespace) -> int:
    cm = CostModel(c_forward=args.cf, c_backward=args.cb, epochs=args.epochs,
                   n=args.n, n_models=args.N, n_active=args.nbar if args.nbar is not None else args.N)
    costs = metrics.cost_of(args.method, cm)
    sys.stdout.write(f"training {costs['training_cost']:g}\n")
    sys.stdout.write(f"inference {costs['inference_cost']:g}\n")
    return 0


def cmd_synth_verify(args: argparse.Namespace) -> int:
    if args.prop == 2:
        cfg = (synthlab.load_suite_config(args.config) if args.config
               else synthlab.SuiteConfig(seed=args.seed, n_models=args.n_models,
                                         shift=args.shift))
        report = synthlab.verify_prop2(cfg, trials=args.trials)
        ok = report.all_ok
    else:
        cfg = (synthlab.load_prop3_config(args.config) if args.config
               else synthlab.Prop3Config(seed=args.seed, n_models=args.n_models,
                                         resolution=args.resolution,
                                         instances=args.instances))
        report = synthlab.verify_prop3(cfg)
        ok = report.all_ok
    if args.out:
        Path(args.out).write_text(report.to_json())
    if args.csv:
        with open(args.csv, "w") as handle:
            report.write_margins_csv(handle)
    sys.stdout.write(f"prop{args.prop} {'ok' if ok else 'VIOLATED'}\n")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dafte",
        description="Ensemble domain-adjacent fine-tuned classifiers from their predictions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ensemble-z", help="zero-shot average ensemble over prediction files")
    p.add_argument("--registry", required=True)
    p.add_argument("--preds", required=True, help="directory of per-model prediction files")
    p.add_argument("--test-labels", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dataset-tag", default="")
    p.add_argument("--text", action="store_true", help="also print the aligned table")
    p.set_defaults(func=cmd_ensemble_z)

    p = sub.add_parser("ensemble-fit", help="fit few-shot ensemble weights (lr) or forest (rf)")
    p.add_argument("--registry", required=True)
    p.add_argument("--preds", required=True)
    p.add_argument("--shots", required=True)
    p.add_argument("--learner", choices=("lr", "rf"), required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--sample-n", type=int, default=None,
                   help="sample this many shots from the pool using --seed")
    p.add_argument("--max-iter", type=int, default=3)
    p.add_argument("--learning-rate", type=float, default=0.01)
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--depth", type=int, default=2)
    p.set_defaults(func=cmd_ensemble_fit)

    p = sub.add_parser("eval", help="evaluate members, the average ensemble, and fitted models")
    p.add_argument("--registry", required=True)
    p.add_argument("--preds", required=True)
    p.add_argument("--test-labels", required=True)
    p.add_argument("--weights", default=None)
    p.add_argument("--forest", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--dataset-tag", default="")
    p.add_argument("--text", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("heatmap", help="pivot eval reports into a source x target accuracy CSV")
    p.add_argument("--registry", required=True)
    p.add_argument("--reports", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("leep", help="transferability score of source predictions vs target labels")
    p.add_argument("--source-preds", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--target-arity", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_leep)

    p = sub.add_parser("fetch", help="run live inference over an HTTP endpoint into a prediction file")
    p.add_argument("--endpoint", required=True)
    p.add_argument("--model-id", required=True)
    p.add_argument("--inputs", required=True, help='JSONL of {"id", "text"} records')
    p.add_argument("--classes", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--timeout", type=float, default=30.0)
    p.add_argument("--retries", type=int, default=2)
    p.add_argument("--max-in-flight", type=int, default=4)
    p.add_argument("--sequential", action="store_true")
    p.add_argument("--cache-dir", default=None,
                   help=f"override the cache directory (or set ${clients.CACHE_ENV_VAR})")
    p.add_argument("--no-cache", action="store_true")
    p.set_defaults(func=cmd_fetch)

    p = sub.add_parser("cost", help="training/inference cost of a method under the cost model")
    p.add_argument("--method", choices=COST_METHODS, required=True)
    p.add_argument("--cf", type=float, default=1.0)
    p.add_argument("--cb", type=float, default=0.0)
    p.add_argument("--epochs", type=float, default=0.0)
    p.add_argument("--n", type=float, default=0.0)
    p.add_argument("--N", type=float, default=1.0)
    p.add_argument("--nbar", type=float, default=None)
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("synth-verify", help="run the synthetic guarantee harnesses")
    p.add_argument("--prop", type=int, choices=(2, 3), required=True)
    p.add_argument("--config", default=None, help="JSON suite config (overrides the flags below)")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--instances", type=int, default=20)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--n-models", type=int, default=None)
    p.add_argument("--shift", type=float, default=1.0)
    p.add_argument("--resolution", type=float, default=0.05)
    p.add_argument("--out", default=None)
    p.add_argument("--csv", default=None)
    p.set_defaults(func=cmd_synth_verify)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "n_models", None) is None and args.command == "synth-verify":
        args.n_models = 5 if args.prop == 2 else 3
    try:
        return args.func(args)
    except DafteError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
