"""Evaluation metrics: accuracy, convex losses, relative improvement, LEEP, costs."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import IO, Mapping, Sequence

import numpy as np

from .core import CostModel, PredictionMatrix
from .ensemble import decide
from .errors import ArityMismatch, EmptyInput, LengthMismatch, NonPositiveBaseline

# Probabilities are clipped here before logs; keeps one-hot rows finite.
PROB_FLOOR = 1e-12

COST_METHODS = ("ft", "daft-z", "daft-e-z", "da(ft)2", "daft-e")


def _check_labels(pred: PredictionMatrix, gold: np.ndarray) -> np.ndarray:
    gold = np.asarray(gold, dtype=np.int64)
    if gold.ndim != 1 or gold.shape[0] != pred.n:
        raise LengthMismatch(f"{pred.n} rows but {gold.shape} gold labels")
    if np.any(gold < 0) or np.any(gold >= pred.label_space.arity):
        raise LengthMismatch("gold labels outside the label space")
    return gold


def accuracy(pred: PredictionMatrix, gold: Sequence[int] | np.ndarray) -> float:
    """Fraction of rows whose argmax matches the gold label."""
    gold = _check_labels(pred, np.asarray(gold))
    return float(np.mean(decide(pred) == gold))


def cross_entropy(pred: PredictionMatrix, gold: Sequence[int] | np.ndarray) -> float:
    """Mean -log p(gold), probabilities floored at PROB_FLOOR."""
    gold = _check_labels(pred, np.asarray(gold))
    p = pred.rows[np.arange(pred.n), gold]
    return float(np.mean(-np.log(np.clip(p, PROB_FLOOR, 1.0))))


def brier(pred: PredictionMatrix, gold: Sequence[int] | np.ndarray) -> float:
    """Mean squared distance between the row and the one-hot gold vector."""
    gold = _check_labels(pred, np.asarray(gold))
    onehot = np.zeros_like(pred.rows)
    onehot[np.arange(pred.n), gold] = 1.0
    return float(np.mean(np.sum((pred.rows - onehot) ** 2, axis=1)))


def relative_improvement(a: float, b: float) -> float:
    """Percentage improvement of a over baseline b: 100 * (a - b) / b."""
    if b <= 0:
        raise NonPositiveBaseline(f"baseline must be > 0, got {b}")
    return 100.0 * (a - b) / b


# -- LEEP ------------------------------------------------------------------------

@dataclass(frozen=True)
class LeepInputs:
    """A source model's dummy distributions plus target gold labels.

    `source_predictions` are n rows over the source classes z (each on the
    simplex); `target_labels` are n indices into the target classes y.
    """

    source_predictions: np.ndarray
    target_labels: np.ndarray
    target_arity: int

    def __post_init__(self) -> None:
        theta = np.asarray(self.source_predictions, dtype=np.float64)
        labels = np.asarray(self.target_labels, dtype=np.int64)
        if theta.ndim != 2 or theta.shape[0] < 1:
            raise EmptyInput("need at least one source prediction row")
        if labels.shape != (theta.shape[0],):
            raise LengthMismatch(f"{theta.shape[0]} rows but {labels.shape} labels")
        if self.target_arity < 1 or np.any(labels < 0) or np.any(labels >= self.target_arity):
            raise ArityMismatch("target labels outside [0, target_arity)")
        if np.any(theta < 0) or np.any(np.abs(theta.sum(axis=1) - 1.0) > 1e-6):
            raise ArityMismatch("source prediction rows must lie on the simplex")
        object.__setattr__(self, "source_predictions", theta)
        object.__setattr__(self, "target_labels", labels)


def leep(inputs: LeepInputs) -> float:
    """Log expected empirical prediction of source outputs against target labels.

    Builds the empirical joint over (target label, source class), conditions
    on the source class (unobserved source classes are dropped rather than
    smoothed), and averages the log mass each sample's dummy distribution
    puts on its own gold label. Always <= 0; 0 exactly when that mass is 1
    for every sample.
    """
    theta = inputs.source_predictions
    labels = inputs.target_labels
    n, kz = theta.shape
    ky = inputs.target_arity

    joint = np.zeros((ky, kz))
    np.add.at(joint, labels, theta / n)
    pz = joint.sum(axis=0)
    seen = pz > 0.0
    cond = np.zeros_like(joint)
    cond[:, seen] = joint[:, seen] / pz[seen]

    expected = np.einsum("iz,iz->i", cond[labels][:, seen], theta[:, seen])
    return float(np.mean(np.log(np.clip(expected, PROB_FLOOR, None))))


# -- computational cost table ------------------------------------------------------

def cost_of(method: str, cm: CostModel) -> dict[str, float]:
    """Training and inference cost of one method under the symbolic cost model.

    ft / da(ft)2: train n(C_F + C_B)E, infer C_F. daft-z: free training,
    infer C_F. daft-e-z: free training, infer N * C_F. daft-e: train
    n(C_F + E), infer N_active * C_F.
    """
    key = method.strip().lower()
    if key in ("ft", "da(ft)2"):
        return {
            "training_cost": cm.n * (cm.c_forward + cm.c_backward) * cm.epochs,
            "inference_cost": cm.c_forward,
        }
    if key == "daft-z":
        return {"training_cost": 0.0, "inference_cost": cm.c_forward}
    if key == "daft-e-z":
        return {"training_cost": 0.0, "inference_cost": cm.n_models * cm.c_forward}
    if key == "daft-e":
        return {
            "training_cost": cm.n * (cm.c_forward + cm.epochs),
            "inference_cost": cm.n_active * cm.c_forward,
        }
    raise ArityMismatch(f"unknown method {method!r}; expected one of {COST_METHODS}")


# -- heatmap export ----------------------------------------------------------------

def write_heatmap_csv(
    out: IO[str],
    cells: Mapping[tuple[str, str], float],
) -> None:
    """Write accuracy cells keyed by (source tag, target tag) as a CSV grid.

    Rows are source dataset tags (the data a member was fine-tuned on),
    columns are target dataset tags (the data it was tested on); first-seen
    order is preserved.
    """
    sources: list[str] = []
    targets: list[str] = []
    for src, tgt in cells:
        if src not in sources:
            sources.append(src)
        if tgt not in targets:
            targets.append(tgt)
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["source\\target", *targets])
    for src in sources:
        row: list[object] = [src]
        for tgt in targets:
            value = cells.get((src, tgt))
            row.append("" if value is None else f"{value:.6f}")
        writer.writerow(row)
