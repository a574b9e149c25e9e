"""Shared domain types: label spaces, probability matrices, registries, reports.

Class probabilities are the interchange format everywhere in this package.
Producers are expected to softmax before emitting; a small repair band
(`ROW_MASS_TOLERANCE`) silently renormalizes float noise, anything beyond it
is rejected as an exporter bug.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    ArityMismatch,
    DuplicateModelId,
    MappingArityMismatch,
    NegativeEntry,
    RowMassOutOfTolerance,
    RowMassZero,
    ZeroMassAfterMapping,
)

# Rows whose mass deviates from 1 by more than this are rejected outright.
ROW_MASS_TOLERANCE = 1e-6
# Rows within this band of 1 are stored untouched (keeps round-trips bitwise).
ROW_MASS_EXACT = 1e-9


def _freeze(a: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(a, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class LabelSpace:
    """Ordered class names of a classification task."""

    classes: tuple[str, ...]

    def __post_init__(self) -> None:
        classes = tuple(self.classes)
        object.__setattr__(self, "classes", classes)
        if len(classes) < 2:
            raise ArityMismatch(f"label space needs at least 2 classes, got {len(classes)}")
        if len(set(classes)) != len(classes):
            raise ArityMismatch(f"duplicate class names in {classes}")

    @property
    def arity(self) -> int:
        return len(self.classes)

    def index_of(self, name: str) -> int:
        return self.classes.index(name)


@dataclass(frozen=True)
class OutputMapping:
    """Linear map from a model's native class space onto the target space.

    `matrix` is K_target x K_source, nonnegative, every column summing to at
    most 1. Columns may sum to less than 1: mass of a source class with no
    target counterpart (e.g. a "neutral" class) is dropped and the mapped row
    renormalized.
    """

    matrix: np.ndarray
    source: LabelSpace
    target: LabelSpace

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape != (self.target.arity, self.source.arity):
            raise MappingArityMismatch(
                f"mapping must be {self.target.arity}x{self.source.arity}, got {m.shape}"
            )
        if np.any(m < 0):
            raise NegativeEntry("mapping entries must be nonnegative")
        col_sums = m.sum(axis=0)
        if np.any(col_sums > 1.0 + ROW_MASS_EXACT):
            raise MappingArityMismatch(f"mapping columns must sum to <= 1, got {col_sums}")
        if not np.any(m > 0):
            raise MappingArityMismatch("mapping must have at least one positive entry")
        object.__setattr__(self, "matrix", _freeze(m))

    @classmethod
    def identity(cls, space: LabelSpace) -> "OutputMapping":
        return cls(np.eye(space.arity), source=space, target=space)


@dataclass(frozen=True)
class PredictionMatrix:
    """Per-sample class probability rows emitted by one model.

    Rows live on the probability simplex of `label_space` (sums within
    `ROW_MASS_EXACT` of 1, entries in [0, 1]). `sample_ids`, when present,
    align positionally with rows; they default to "0", "1", ... on access.
    """

    model_id: str
    rows: np.ndarray
    label_space: LabelSpace
    sample_ids: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim != 2:
            raise ArityMismatch(f"rows must be 2-D, got ndim={rows.ndim}")
        n, k = rows.shape
        if n < 1:
            raise ArityMismatch("prediction matrix needs at least one row")
        if k != self.label_space.arity:
            raise ArityMismatch(f"rows have arity {k}, label space has {self.label_space.arity}")
        if np.any(rows < 0) or np.any(rows > 1):
            raise NegativeEntry("entries must lie in [0, 1]")
        sums = rows.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > ROW_MASS_EXACT):
            raise RowMassOutOfTolerance(
                f"row mass outside 1 +- {ROW_MASS_EXACT}: worst {sums[np.argmax(np.abs(sums - 1.0))]}"
            )
        if self.sample_ids is not None:
            ids = tuple(str(s) for s in self.sample_ids)
            if len(ids) != n:
                raise ArityMismatch(f"{len(ids)} sample ids for {n} rows")
            object.__setattr__(self, "sample_ids", ids)
        object.__setattr__(self, "rows", _freeze(rows))

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    def ids(self) -> tuple[str, ...]:
        if self.sample_ids is not None:
            return self.sample_ids
        return tuple(str(i) for i in range(self.n))


def _repair_rows(rows: np.ndarray, *, context: str) -> np.ndarray:
    """Renormalize rows within the repair band; reject anything worse."""
    sums = rows.sum(axis=1)
    if np.any(sums == 0.0):
        raise RowMassZero(f"{context}: row {int(np.flatnonzero(sums == 0.0)[0])} has zero mass")
    off = np.abs(sums - 1.0)
    if np.any(off > ROW_MASS_TOLERANCE):
        bad = int(np.argmax(off))
        raise RowMassOutOfTolerance(f"{context}: row {bad} has mass {sums[bad]!r}")
    needs = (off > ROW_MASS_EXACT) | (rows.max(axis=1) > 1.0)
    if np.any(needs):
        rows = rows.copy()
        rows[needs] = rows[needs] / sums[needs, None]
    return rows


def validate_prediction_matrix(
    raw_rows: Sequence[Sequence[float]] | np.ndarray,
    label_space: LabelSpace,
    *,
    model_id: str = "unnamed",
    sample_ids: Sequence[str] | None = None,
) -> PredictionMatrix:
    """Validate raw probability rows and return an immutable matrix.

    Rows within `ROW_MASS_TOLERANCE` of the simplex are renormalized; rows
    already within `ROW_MASS_EXACT` are stored bit-for-bit unchanged.
    """
    try:
        rows = np.array(raw_rows, dtype=np.float64)
    except ValueError as exc:
        raise ArityMismatch(f"rows are not rectangular: {exc}") from exc
    if rows.ndim != 2:
        raise ArityMismatch(f"rows must be 2-D, got ndim={rows.ndim}")
    if rows.shape[0] < 1:
        raise ArityMismatch("need at least one row")
    if rows.shape[1] != label_space.arity:
        raise ArityMismatch(
            f"rows have arity {rows.shape[1]}, label space has {label_space.arity}"
        )
    if np.any(rows < 0):
        raise NegativeEntry("negative probability entry")
    rows = _repair_rows(rows, context=f"model {model_id!r}")
    ids = tuple(sample_ids) if sample_ids is not None else None
    return PredictionMatrix(model_id=model_id, rows=rows, label_space=label_space, sample_ids=ids)


def map_outputs(pred: PredictionMatrix, mapping: OutputMapping) -> PredictionMatrix:
    """Project predictions onto the mapping's target space and renormalize.

    Rows that keep all their mass (identity mappings in particular) are
    passed through bitwise; a row whose mass is entirely dropped raises
    `ZeroMassAfterMapping`.
    """
    if pred.label_space != mapping.source:
        raise ArityMismatch(
            f"prediction space {pred.label_space.classes} != mapping source {mapping.source.classes}"
        )
    mapped = pred.rows @ mapping.matrix.T
    sums = mapped.sum(axis=1)
    if np.any(sums == 0.0):
        bad = int(np.flatnonzero(sums == 0.0)[0])
        raise ZeroMassAfterMapping(f"model {pred.model_id!r}: row {bad} lost all mass")
    needs = (np.abs(sums - 1.0) > ROW_MASS_EXACT) | (mapped.max(axis=1) > 1.0)
    if np.any(needs):
        mapped[needs] = mapped[needs] / sums[needs, None]
    return PredictionMatrix(
        model_id=pred.model_id,
        rows=mapped,
        label_space=mapping.target,
        sample_ids=pred.sample_ids,
    )


# -- model registries ----------------------------------------------------------

@dataclass(frozen=True)
class ModelDescriptor:
    """Identity and plumbing for one ensemble member.

    `backend` points at where predictions come from: a prediction-file path
    (optionally prefixed "file:"), an "http(s)://" endpoint, or a
    "synthetic:" handle.
    """

    id: str
    base_model_tag: str
    source_dataset_tag: str
    backend: str
    label_space: LabelSpace
    mapping: OutputMapping

    def __post_init__(self) -> None:
        if self.mapping.source != self.label_space:
            raise MappingArityMismatch(
                f"model {self.id!r}: mapping source disagrees with native classes"
            )

    @property
    def backend_kind(self) -> str:
        if self.backend.startswith(("http://", "https://")):
            return "http"
        if self.backend.startswith("synthetic:"):
            return "synthetic"
        return "file"


@dataclass(frozen=True)
class Registry:
    """The available model pool for one target task.

    Theoretical cap on pool size (#bases x #source datasets) is metadata the
    caller may care about; it is not enforced here.
    """

    label_space: LabelSpace
    models: tuple[ModelDescriptor, ...]

    def __post_init__(self) -> None:
        models = tuple(self.models)
        object.__setattr__(self, "models", models)
        if not models:
            raise ArityMismatch("registry needs at least one model")
        seen: set[str] = set()
        for m in models:
            if m.id in seen:
                raise DuplicateModelId(f"duplicate model id {m.id!r}")
            seen.add(m.id)
            if m.mapping.target != self.label_space:
                raise MappingArityMismatch(
                    f"model {m.id!r}: mapping targets {m.mapping.target.classes}, "
                    f"registry expects {self.label_space.classes}"
                )

    @property
    def n_models(self) -> int:
        return len(self.models)


# -- few-shot sets and ensemble weights ----------------------------------------

@dataclass(frozen=True)
class FewShotSet:
    """Labeled target-domain samples used to fit ensemble weights."""

    sample_ids: tuple[str, ...]
    labels: np.ndarray
    arity: int

    def __post_init__(self) -> None:
        ids = tuple(str(s) for s in self.sample_ids)
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.ndim != 1 or len(ids) != labels.shape[0]:
            raise ArityMismatch("sample ids and labels must align 1:1")
        if labels.shape[0] < 1:
            raise ArityMismatch("few-shot set needs at least one sample")
        if np.any(labels < 0) or np.any(labels >= self.arity):
            raise ArityMismatch(f"labels must lie in [0, {self.arity})")
        object.__setattr__(self, "sample_ids", ids)
        labels = labels.copy()
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return len(self.sample_ids)


@dataclass(frozen=True)
class EnsembleWeights:
    """Per-class weights over ensemble members, plus per-class intercepts.

    `w[k, m]` weighs model m's class-k probability; a shared weight vector is
    the special case of identical rows.
    """

    w: np.ndarray
    intercepts: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.w, dtype=np.float64)
        b = np.asarray(self.intercepts, dtype=np.float64)
        if w.ndim != 2:
            raise ArityMismatch("weight matrix must be K x N")
        if b.shape != (w.shape[0],):
            raise ArityMismatch(f"{w.shape[0]} classes but {b.shape} intercepts")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ArityMismatch("weights must be finite")
        object.__setattr__(self, "w", _freeze(w))
        object.__setattr__(self, "intercepts", _freeze(b))

    @classmethod
    def uniform(cls, arity: int, n_models: int) -> "EnsembleWeights":
        return cls(np.full((arity, n_models), 1.0 / n_models), np.zeros(arity))

    @classmethod
    def shared(cls, vector: Sequence[float] | np.ndarray, arity: int) -> "EnsembleWeights":
        v = np.asarray(vector, dtype=np.float64)
        return cls(np.tile(v, (arity, 1)), np.zeros(arity))

    @property
    def n_models(self) -> int:
        return self.w.shape[1]

    @property
    def arity(self) -> int:
        return self.w.shape[0]


# -- cost model -----------------------------------------------------------------

@dataclass(frozen=True)
class CostModel:
    """Symbolic cost parameters for the method cost table.

    c_forward/c_backward are per-pass model costs, epochs the number of
    fine-tuning epochs, n the few-shot count, n_models the pool size and
    n_active the number of members with nonzero ensemble weight.
    """

    c_forward: float
    c_backward: float
    epochs: float
    n: float
    n_models: float
    n_active: float

    def __post_init__(self) -> None:
        for name in ("c_forward", "c_backward", "epochs", "n", "n_models", "n_active"):
            if getattr(self, name) < 0:
                raise ArityMismatch(f"cost parameter {name} must be >= 0")
        if self.n_active > self.n_models:
            raise ArityMismatch("n_active cannot exceed n_models")


# -- evaluation reports -----------------------------------------------------------

REPORT_FORMAT = "dafte-report/1"


@dataclass(frozen=True)
class RIEntry:
    """One relative-improvement comparison, keeping the (a, b) pair it came from."""

    a: str
    b: str
    a_value: float
    b_value: float
    value: float


@dataclass
class EvalReport:
    """Per-method accuracy/loss table with pairwise relative improvements."""

    accuracy: dict[str, float] = field(default_factory=dict)
    loss: dict[str, float] = field(default_factory=dict)
    ri: list[RIEntry] = field(default_factory=list)
    metadata: dict[str, object] = field(default_factory=dict)

    def add_method(self, name: str, accuracy: float, loss: float) -> None:
        if not 0.0 <= accuracy <= 1.0:
            raise ArityMismatch(f"accuracy for {name!r} outside [0, 1]: {accuracy}")
        self.accuracy[name] = float(accuracy)
        self.loss[name] = float(loss)

    def add_ri(self, a: str, b: str, ri_value: float) -> None:
        self.ri.append(RIEntry(a, b, self.accuracy[a], self.accuracy[b], float(ri_value)))

    def to_dict(self) -> dict:
        return {
            "format": REPORT_FORMAT,
            "metadata": dict(self.metadata),
            "methods": {
                name: {"accuracy": self.accuracy[name], "loss": self.loss[name]}
                for name in self.accuracy
            },
            "relative_improvement": [
                {"a": e.a, "b": e.b, "a_value": e.a_value, "b_value": e.b_value, "value": e.value}
                for e in self.ri
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_text(self) -> str:
        """Aligned-column rendering for terminals."""
        names = list(self.accuracy)
        width = max([len(n) for n in names] + [6])
        lines = [f"{'method':<{width}}  {'accuracy':>10}  {'loss':>12}"]
        for name in names:
            lines.append(
                f"{name:<{width}}  {self.accuracy[name]:>10.4f}  {self.loss[name]:>12.6f}"
            )
        if self.ri:
            lines.append("")
            lines.append(f"{'RI(a, b)':<{2 * width + 6}}  {'value %':>10}")
            for e in self.ri:
                pair = f"RI({e.a}, {e.b})"
                lines.append(f"{pair:<{2 * width + 6}}  {e.value:>10.4f}")
        return "\n".join(lines) + "\n"


def identity_like(space: LabelSpace) -> np.ndarray:
    return np.eye(space.arity)


def align_rows_to_ids(pred: PredictionMatrix, wanted_ids: Iterable[str]) -> np.ndarray:
    """Row indices of `wanted_ids` inside `pred`, by sample id."""
    index = {sid: i for i, sid in enumerate(pred.ids())}
    rows = []
    for sid in wanted_ids:
        if sid not in index:
            raise ArityMismatch(f"sample id {sid!r} not present in model {pred.model_id!r}")
        rows.append(index[sid])
    return np.asarray(rows, dtype=np.int64)
