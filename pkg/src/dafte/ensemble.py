"""Ensembling of prediction matrices: averaging, weighting, voting, deciding.

All functions are pure over immutable inputs and safe to call concurrently.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .core import ROW_MASS_EXACT, EnsembleWeights, PredictionMatrix
from .errors import EmptyEnsemble, ShapeMismatch

AVERAGE_ID = "average-ensemble"
WEIGHTED_ID = "weighted-ensemble"


def _check_aligned(preds: Sequence[PredictionMatrix]) -> tuple[int, int]:
    if not preds:
        raise EmptyEnsemble("need at least one prediction matrix")
    first = preds[0]
    for p in preds[1:]:
        if p.n != first.n:
            raise ShapeMismatch(f"{p.model_id!r} has {p.n} rows, {first.model_id!r} has {first.n}")
        if p.label_space != first.label_space:
            raise ShapeMismatch(f"{p.model_id!r} targets a different label space")
    return first.n, first.label_space.arity


def _finish(rows: np.ndarray, preds: Sequence[PredictionMatrix], model_id: str) -> PredictionMatrix:
    return PredictionMatrix(
        model_id=model_id,
        rows=rows,
        label_space=preds[0].label_space,
        sample_ids=preds[0].sample_ids,
    )


def average_ensemble(preds: Sequence[PredictionMatrix]) -> PredictionMatrix:
    """Arithmetic mean of the members' probability rows (the zero-shot ensemble)."""
    _check_aligned(preds)
    if len(preds) == 1:
        return _finish(preds[0].rows, preds, AVERAGE_ID)
    stacked = np.stack([p.rows for p in preds])
    return _finish(stacked.mean(axis=0), preds, AVERAGE_ID)


def weighted_ensemble(
    preds: Sequence[PredictionMatrix], weights: EnsembleWeights
) -> PredictionMatrix:
    """Per-class weighted combination of member probabilities.

    score(i, k) = intercept_k + sum_m w[k, m] * preds[m][i, k]. Learned
    weights are unconstrained, so scores may leave the simplex; they are
    clamped at 0 and renormalized per row so downstream losses stay defined.
    A row clamped to all-zero falls back to the uniform distribution.
    """
    n, k = _check_aligned(preds)
    if weights.arity != k or weights.n_models != len(preds):
        raise ShapeMismatch(
            f"weights are {weights.arity}x{weights.n_models}, "
            f"ensemble is {k} classes x {len(preds)} models"
        )
    stacked = np.stack([p.rows for p in preds])  # (N, n, K)
    scores = np.einsum("km,mik->ik", weights.w, stacked) + weights.intercepts[None, :]
    scores = np.clip(scores, 0.0, None)
    sums = scores.sum(axis=1)
    dead = sums == 0.0
    if np.any(dead):
        scores[dead] = 1.0 / k
        sums[dead] = 1.0
    needs = (np.abs(sums - 1.0) > ROW_MASS_EXACT) | (scores.max(axis=1) > 1.0)
    if np.any(needs):
        scores[needs] = scores[needs] / sums[needs, None]
    return _finish(scores, preds, WEIGHTED_ID)


def majority_vote(preds: Sequence[PredictionMatrix]) -> np.ndarray:
    """Mode of the members' argmax labels; ties go to the lowest class index."""
    n, k = _check_aligned(preds)
    votes = np.stack([decide(p) for p in preds])  # (N, n)
    counts = np.zeros((n, k), dtype=np.int64)
    for model_votes in votes:
        counts[np.arange(n), model_votes] += 1
    return counts.argmax(axis=1)


def decide(pred: PredictionMatrix) -> np.ndarray:
    """Per-row argmax labels; ties go to the lowest class index."""
    return pred.rows.argmax(axis=1)
