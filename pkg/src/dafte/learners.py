"""Ensemble-layer learners built from scratch.

Two few-shot weight learners operate on the members' output probabilities:
a per-class squared-loss SGD linear regressor and a shallow random forest
over the stacked probability features. A brute-force simplex grid search
acts as an independent weight oracle for small ensembles.
"""

from __future__ import annotations

import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .core import ROW_MASS_EXACT, EnsembleWeights, FewShotSet, PredictionMatrix
from .ensemble import weighted_ensemble
from .errors import (
    ArityMismatch,
    EmptyShots,
    NonFiniteWeights,
    ParseError,
    ShapeMismatch,
    TooManyModels,
)
from .metrics import cross_entropy

WEIGHTS_FORMAT = "dafte-weights/1"
FOREST_FORMAT = "dafte-forest/1"

# Exhaustive simplex search is only tractable for small pools.
GRID_MAX_MODELS = 5


@dataclass(frozen=True)
class LRConfig:
    """SGD linear-regressor settings for the ensemble layer.

    The tiny default epoch count guards against overfitting in the few-shot
    regime. `learning_rate` 0 is permitted so tests can freeze the uniform
    initialization. `l2` defaults to 0: no regularization term on the weights.
    """

    max_iter: int = 3
    learning_rate: float = 0.01
    schedule: str = "invscaling"
    seed: int = 0
    shuffle: bool = True
    l2: float = 0.0
    power: float = 0.25

    def __post_init__(self) -> None:
        if self.max_iter < 1:
            raise ArityMismatch(f"max_iter must be >= 1, got {self.max_iter}")
        if self.learning_rate < 0:
            raise ArityMismatch(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.schedule not in ("constant", "invscaling"):
            raise ArityMismatch(f"unknown schedule {self.schedule!r}")
        if self.l2 < 0:
            raise ArityMismatch("l2 must be >= 0")


@dataclass(frozen=True)
class RFConfig:
    """Random-forest settings: shallow trees over stacked probability features."""

    n_trees: int = 100
    max_depth: int = 2
    seed: int = 0
    bootstrap: bool = True

    def __post_init__(self) -> None:
        if self.max_depth < 1:
            raise ArityMismatch(f"max_depth must be >= 1, got {self.max_depth}")
        if self.n_trees < 1:
            raise ArityMismatch(f"n_trees must be >= 1, got {self.n_trees}")


def _check_fit_inputs(preds: Sequence[PredictionMatrix], shots: FewShotSet) -> tuple[int, int]:
    if not preds:
        raise ShapeMismatch("need at least one prediction matrix")
    if shots.n < 1:
        raise EmptyShots("few-shot set is empty")
    k = preds[0].label_space.arity
    for p in preds:
        if p.n != shots.n:
            raise ShapeMismatch(f"model {p.model_id!r} has {p.n} rows for {shots.n} shots")
        if p.label_space.arity != k:
            raise ShapeMismatch("prediction matrices disagree on class arity")
    if shots.arity != k:
        raise ShapeMismatch(f"shots carry arity {shots.arity}, predictions have {k}")
    return shots.n, k


# -- SGD linear regressor -----------------------------------------------------------

def fit_lr(
    preds: Sequence[PredictionMatrix], shots: FewShotSet, cfg: LRConfig = LRConfig()
) -> EnsembleWeights:
    """Fit one squared-loss SGD regressor per target class.

    Regressor k sees, per shot, the N member probabilities of class k as
    features and the one-hot indicator of class k as target. Weights start
    uniform at 1/N with zero intercepts, then run exactly `cfg.max_iter`
    epochs of per-sample SGD in a seeded (optionally shuffled) order shared
    by all K regressors. The inverse-scaling schedule divides the base rate
    by step^power; steps count across epochs starting at 1.
    """
    n, k = _check_fit_inputs(preds, shots)
    n_models = len(preds)
    feats = np.stack([p.rows for p in preds])  # (N, n, K)
    onehot = np.zeros((n, k))
    onehot[np.arange(n), shots.labels] = 1.0

    w = np.full((k, n_models), 1.0 / n_models)
    b = np.zeros(k)
    rng = np.random.default_rng(cfg.seed)
    t = 1
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(cfg.max_iter):
            order = rng.permutation(n) if cfg.shuffle else np.arange(n)
            for i in order:
                eta = cfg.learning_rate
                if cfg.schedule == "invscaling":
                    eta = cfg.learning_rate / t**cfg.power
                x = feats[:, i, :]  # (N, K): column k feeds regressor k
                err = np.einsum("km,mk->k", w, x) + b - onehot[i]
                w -= eta * (err[:, None] * x.T + cfg.l2 * w)
                b -= eta * err
                t += 1
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise NonFiniteWeights("SGD diverged to non-finite weights")
    return EnsembleWeights(w, b)


# -- random forest ------------------------------------------------------------------

@dataclass(frozen=True)
class TreeNode:
    """One node of a decision tree; leaves carry a class distribution."""

    feature: int
    threshold: float
    left: int
    right: int
    dist: tuple[float, ...] | None

    @property
    def is_leaf(self) -> bool:
        return self.dist is not None


Tree = tuple[TreeNode, ...]


@dataclass(frozen=True)
class RFModel:
    """A fitted forest of depth-limited trees over stacked probability features.

    `degenerate` flags a single-class few-shot set: the forest is then a
    bag of majority leaves and should be treated with suspicion.
    """

    trees: tuple[Tree, ...]
    arity: int
    n_features: int
    max_depth: int
    degenerate: bool = False

    def tree_depth(self, tree: Tree) -> int:
        def depth(idx: int) -> int:
            node = tree[idx]
            if node.is_leaf:
                return 0
            return 1 + max(depth(node.left), depth(node.right))

        return depth(0)


def _gini_best_split(values: np.ndarray, onehot: np.ndarray) -> tuple[float, float] | None:
    """Best (weighted child Gini, threshold) along one feature, or None."""
    order = np.argsort(values, kind="stable")
    v = values[order]
    cum = np.cumsum(onehot[order], axis=0)  # prefix class counts
    n = v.shape[0]
    cut = np.flatnonzero(v[:-1] < v[1:])  # split after these positions
    if cut.size == 0:
        return None
    total = cum[-1]
    nl = (cut + 1).astype(np.float64)
    nr = n - nl
    left = cum[cut]
    right = total[None, :] - left
    gini_l = 1.0 - np.sum((left / nl[:, None]) ** 2, axis=1)
    gini_r = 1.0 - np.sum((right / nr[:, None]) ** 2, axis=1)
    weighted = (nl * gini_l + nr * gini_r) / n
    best = int(np.argmin(weighted))
    threshold = (v[cut[best]] + v[cut[best] + 1]) / 2.0
    return float(weighted[best]), threshold


def _grow_tree(
    x: np.ndarray,
    y: np.ndarray,
    arity: int,
    max_depth: int,
    max_features: int,
    rng: np.random.Generator,
) -> Tree:
    nodes: list[TreeNode] = []

    def leaf(indices: np.ndarray) -> int:
        counts = np.bincount(y[indices], minlength=arity).astype(np.float64)
        dist = counts / counts.sum()
        nodes.append(TreeNode(-1, 0.0, -1, -1, tuple(dist)))
        return len(nodes) - 1

    def grow(indices: np.ndarray, depth: int) -> int:
        ys = y[indices]
        if depth >= max_depth or indices.size < 2 or np.all(ys == ys[0]):
            return leaf(indices)
        candidates = rng.permutation(x.shape[1])[:max_features]
        onehot = np.zeros((indices.size, arity))
        onehot[np.arange(indices.size), ys] = 1.0
        best: tuple[float, int, float] | None = None
        for f in candidates:
            found = _gini_best_split(x[indices, f], onehot)
            if found is not None and (best is None or found[0] < best[0]):
                best = (found[0], int(f), found[1])
        if best is None:
            return leaf(indices)
        _, feature, threshold = best
        idx = len(nodes)
        nodes.append(TreeNode(feature, threshold, -1, -1, None))
        mask = x[indices, feature] <= threshold
        left = grow(indices[mask], depth + 1)
        right = grow(indices[~mask], depth + 1)
        nodes[idx] = TreeNode(feature, threshold, left, right, None)
        return idx

    grow(np.arange(x.shape[0]), 0)
    return tuple(nodes)


def _fit_one_tree(
    x: np.ndarray, y: np.ndarray, arity: int, cfg: RFConfig, tree_index: int
) -> Tree:
    # Fixed per-tree seed derivation keeps parallel training bit-identical
    # to sequential.
    rng = np.random.default_rng(cfg.seed + tree_index)
    if cfg.bootstrap:
        picks = rng.integers(0, x.shape[0], x.shape[0])
        x, y = x[picks], y[picks]
    max_features = max(1, int(np.sqrt(x.shape[1])))
    return _grow_tree(x, y, arity, cfg.max_depth, max_features, rng)


def stack_features(preds: Sequence[PredictionMatrix]) -> np.ndarray:
    """Model-major concatenation of member probabilities: (n, N*K)."""
    return np.concatenate([p.rows for p in preds], axis=1)


def fit_rf(
    preds: Sequence[PredictionMatrix],
    shots: FewShotSet,
    cfg: RFConfig = RFConfig(),
    *,
    parallel: bool = False,
) -> RFModel:
    """Train a Gini random forest on the stacked probability features.

    Each tree draws its own bootstrap sample and considers sqrt(N*K) random
    features per split. Deterministic given the seed, whether trees are
    grown sequentially or in a thread pool.
    """
    n, k = _check_fit_inputs(preds, shots)
    x = stack_features(preds)
    y = np.asarray(shots.labels)
    degenerate = np.unique(y).size < 2
    if degenerate:
        warnings.warn("all shots share one label; forest degenerates to majority leaves")
    if parallel:
        with ThreadPoolExecutor() as pool:
            trees = list(pool.map(lambda t: _fit_one_tree(x, y, k, cfg, t), range(cfg.n_trees)))
    else:
        trees = [_fit_one_tree(x, y, k, cfg, t) for t in range(cfg.n_trees)]
    return RFModel(
        trees=tuple(trees),
        arity=k,
        n_features=x.shape[1],
        max_depth=cfg.max_depth,
        degenerate=degenerate,
    )


def _tree_rows(tree: Tree, x: np.ndarray, arity: int) -> np.ndarray:
    out = np.empty((x.shape[0], arity))
    stack: list[tuple[int, np.ndarray]] = [(0, np.arange(x.shape[0]))]
    while stack:
        idx, indices = stack.pop()
        node = tree[idx]
        if node.is_leaf:
            out[indices] = node.dist
            continue
        mask = x[indices, node.feature] <= node.threshold
        stack.append((node.left, indices[mask]))
        stack.append((node.right, indices[~mask]))
    return out


def predict_rf(model: RFModel, preds: Sequence[PredictionMatrix]) -> PredictionMatrix:
    """Average the leaf distributions of all trees for each sample."""
    if not preds:
        raise ShapeMismatch("need at least one prediction matrix")
    x = stack_features(preds)
    if x.shape[1] != model.n_features:
        raise ShapeMismatch(f"forest expects {model.n_features} features, got {x.shape[1]}")
    if preds[0].label_space.arity != model.arity:
        raise ShapeMismatch("forest arity disagrees with the prediction label space")
    rows = np.zeros((x.shape[0], model.arity))
    for tree in model.trees:
        rows += _tree_rows(tree, x, model.arity)
    rows /= len(model.trees)
    sums = rows.sum(axis=1)
    needs = (np.abs(sums - 1.0) > ROW_MASS_EXACT) | (rows.max(axis=1) > 1.0)
    if np.any(needs):
        rows[needs] = rows[needs] / sums[needs, None]
    return PredictionMatrix(
        model_id="rf-ensemble",
        rows=rows,
        label_space=preds[0].label_space,
        sample_ids=preds[0].sample_ids,
    )


# -- brute-force weight oracle ---------------------------------------------------------

def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """Integer compositions of `total` into `parts`, ascending lexicographic."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first, *rest)


def sweep_weight_grid(
    preds: Sequence[PredictionMatrix],
    labels: np.ndarray,
    resolution: float,
) -> list[tuple[tuple[float, ...], float]]:
    """Cross-entropy of the shared-weight ensemble at every simplex grid point.

    Points are enumerated in ascending lexicographic order of the weight
    vector; the oracle's tie-break falls out of keeping the first minimum.
    """
    if not preds:
        raise ShapeMismatch("need at least one prediction matrix")
    if len(preds) > GRID_MAX_MODELS:
        raise TooManyModels(f"grid search supports at most {GRID_MAX_MODELS} models")
    if not 0.0 < resolution <= 0.5:
        raise ArityMismatch(f"resolution must lie in (0, 0.5], got {resolution}")
    steps = round(1.0 / resolution)
    arity = preds[0].label_space.arity
    out: list[tuple[tuple[float, ...], float]] = []
    for comp in _compositions(steps, len(preds)):
        weight = tuple(c / steps for c in comp)
        combined = weighted_ensemble(preds, EnsembleWeights.shared(weight, arity))
        out.append((weight, cross_entropy(combined, labels)))
    return out


def grid_oracle_weights(
    preds: Sequence[PredictionMatrix],
    shots: FewShotSet,
    resolution: float = 0.05,
) -> EnsembleWeights:
    """Exhaustive shared-weight search over the simplex grid.

    Returns the grid point minimizing cross-entropy on the shots; ties break
    toward the lexicographically smallest weight vector.
    """
    _check_fit_inputs(preds, shots)
    swept = sweep_weight_grid(preds, np.asarray(shots.labels), resolution)
    best_weight, best_loss = swept[0]
    for weight, loss in swept[1:]:
        if loss < best_loss:
            best_weight, best_loss = weight, loss
    return EnsembleWeights.shared(best_weight, preds[0].label_space.arity)


# -- serialization -----------------------------------------------------------------------

def save_weights(weights: EnsembleWeights, path: str | Path) -> None:
    payload = {
        "format": WEIGHTS_FORMAT,
        "n_models": weights.n_models,
        "arity": weights.arity,
        "w": weights.w.tolist(),
        "intercepts": weights.intercepts.tolist(),
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def load_weights(path: str | Path) -> EnsembleWeights:
    payload = _read_payload(path, WEIGHTS_FORMAT)
    try:
        return EnsembleWeights(np.array(payload["w"]), np.array(payload["intercepts"]))
    except KeyError as exc:
        raise ParseError(f"{path}: missing field {exc}") from exc


def save_forest(model: RFModel, path: str | Path) -> None:
    payload = {
        "format": FOREST_FORMAT,
        "arity": model.arity,
        "n_features": model.n_features,
        "max_depth": model.max_depth,
        "degenerate": model.degenerate,
        "trees": [
            [
                {
                    "feature": node.feature,
                    "threshold": node.threshold,
                    "left": node.left,
                    "right": node.right,
                    "dist": list(node.dist) if node.dist is not None else None,
                }
                for node in tree
            ]
            for tree in model.trees
        ],
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def load_forest(path: str | Path) -> RFModel:
    payload = _read_payload(path, FOREST_FORMAT)
    try:
        trees = tuple(
            tuple(
                TreeNode(
                    feature=node["feature"],
                    threshold=node["threshold"],
                    left=node["left"],
                    right=node["right"],
                    dist=tuple(node["dist"]) if node["dist"] is not None else None,
                )
                for node in tree
            )
            for tree in payload["trees"]
        )
        return RFModel(
            trees=trees,
            arity=payload["arity"],
            n_features=payload["n_features"],
            max_depth=payload["max_depth"],
            degenerate=payload["degenerate"],
        )
    except KeyError as exc:
        raise ParseError(f"{path}: missing field {exc}") from exc


def _read_payload(path: str | Path, expected_format: str) -> dict:
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format") != expected_format:
        raise ParseError(f"{path}: expected format tag {expected_format!r}")
    return payload
