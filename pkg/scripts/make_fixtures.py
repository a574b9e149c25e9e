#!/usr/bin/env python3
"""Regenerate the checked-in fixtures under fixtures/.

Everything here is deterministic; re-running must reproduce the same bytes.
The toy fixture is a hand-sized two-model instance whose first ensemble row
is the canonical [0.6, 0.4] averaging case; the dominant fixture pairs one
member fine-tuned on the target domain with two far-shifted members so that
learned weighting visibly beats plain averaging.
"""

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from dafte import cli  # noqa: E402
from dafte.clients import store_predictions  # noqa: E402
from dafte.core import LabelSpace, validate_prediction_matrix  # noqa: E402
from dafte.synthlab import (  # noqa: E402
    DomainConfig,
    gen_domain,
    train_synthetic,
)

FIXTURES = ROOT / "fixtures"
BINARY = LabelSpace(("neg", "pos"))


def write_jsonl(path: Path, records: list[dict]) -> None:
    path.write_text("\n".join(json.dumps(r) for r in records) + "\n")


def make_toy() -> None:
    toy = FIXTURES / "toy"
    (toy / "preds").mkdir(parents=True, exist_ok=True)
    (toy / "registry.json").write_text(
        json.dumps(
            {
                "format": "dafte-registry/1",
                "classes": ["neg", "pos"],
                "models": [
                    {"id": "m1", "base_model_tag": "base-a", "source_dataset_tag": "reviews",
                     "backend": "file:m1.jsonl", "classes": ["neg", "pos"],
                     "mapping": [1, 0, 0, 1]},
                    {"id": "m2", "base_model_tag": "base-b", "source_dataset_tag": "blurbs",
                     "backend": "file:m2.jsonl", "classes": ["neg", "pos"],
                     "mapping": [1, 0, 0, 1]},
                ],
            },
            indent=2,
        )
        + "\n"
    )
    ids = ["a", "b", "c", "d"]
    m1 = [[0.8, 0.2], [0.3, 0.7], [0.9, 0.1], [0.55, 0.45]]
    m2 = [[0.4, 0.6], [0.1, 0.9], [0.7, 0.3], [0.35, 0.65]]
    store_predictions(
        validate_prediction_matrix(m1, BINARY, model_id="m1", sample_ids=ids),
        toy / "preds" / "m1.jsonl",
    )
    store_predictions(
        validate_prediction_matrix(m2, BINARY, model_id="m2", sample_ids=ids),
        toy / "preds" / "m2.jsonl",
    )
    write_jsonl(
        toy / "test-labels.jsonl",
        [{"id": sid, "label": label} for sid, label in zip(ids, [0, 1, 0, 1])],
    )
    rc = cli.main(
        [
            "ensemble-z",
            "--registry", str(toy / "registry.json"),
            "--preds", str(toy / "preds"),
            "--test-labels", str(toy / "test-labels.jsonl"),
            "--dataset-tag", "toy",
            "--out", str(toy / "golden_report.json"),
        ]
    )
    assert rc == 0


def make_leep_toy() -> None:
    leep_dir = FIXTURES / "leep"
    leep_dir.mkdir(parents=True, exist_ok=True)
    theta = [[0.9, 0.1], [0.8, 0.2], [0.3, 0.7], [0.1, 0.9]]
    labels = [0, 0, 1, 1]
    ids = [f"s{i}" for i in range(4)]
    store_predictions(
        validate_prediction_matrix(theta, LabelSpace(("src0", "src1")),
                                   model_id="leep-source", sample_ids=ids),
        leep_dir / "source.jsonl",
    )
    write_jsonl(
        leep_dir / "labels.jsonl",
        [{"id": sid, "label": label} for sid, label in zip(ids, labels)],
    )


def make_dominant() -> None:
    dom = FIXTURES / "dominant"
    for sub in ("train", "test"):
        (dom / sub).mkdir(parents=True, exist_ok=True)

    target = gen_domain(DomainConfig(seed=21, separation=2.0))
    # the two far members share one shifted domain so their errors correlate:
    # plain averaging is then provably hurt and learned weighting visibly wins
    far_domain = gen_domain(DomainConfig(seed=21, shift=3.0, shift_seed=31))
    members = {
        "m-near": train_synthetic(target, 200, seed=1),
        "m-far1": train_synthetic(far_domain, 200, seed=2),
        "m-far2": train_synthetic(far_domain, 200, seed=3),
    }
    (dom / "registry.json").write_text(
        json.dumps(
            {
                "format": "dafte-registry/1",
                "classes": ["neg", "pos"],
                "models": [
                    {"id": name, "base_model_tag": "logistic",
                     "source_dataset_tag": tag, "backend": f"file:{name}.jsonl",
                     "classes": ["neg", "pos"], "mapping": [1, 0, 0, 1]}
                    for name, tag in
                    (("m-near", "target-like"), ("m-far1", "far-a"), ("m-far2", "far-b"))
                ],
            },
            indent=2,
        )
        + "\n"
    )

    x_train, y_train = target.sample(64, seed=100)
    x_test, y_test = target.sample(200, seed=101)
    train_ids = [f"shot{i}" for i in range(64)]
    test_ids = [f"t{i}" for i in range(200)]
    for name, model in members.items():
        store_predictions(
            validate_prediction_matrix(model.predict_rows(x_train), BINARY,
                                       model_id=name, sample_ids=train_ids),
            dom / "train" / f"{name}.jsonl",
        )
        store_predictions(
            validate_prediction_matrix(model.predict_rows(x_test), BINARY,
                                       model_id=name, sample_ids=test_ids),
            dom / "test" / f"{name}.jsonl",
        )
    write_jsonl(
        dom / "shots.jsonl",
        [{"id": sid, "label": int(label)} for sid, label in zip(train_ids, y_train)],
    )
    write_jsonl(
        dom / "test-labels.jsonl",
        [{"id": sid, "label": int(label)} for sid, label in zip(test_ids, y_test)],
    )


def main() -> None:
    FIXTURES.mkdir(exist_ok=True)
    make_toy()
    make_leep_toy()
    make_dominant()
    print(f"fixtures written under {FIXTURES}")


if __name__ == "__main__":
    main()
