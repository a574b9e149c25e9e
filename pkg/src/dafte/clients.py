"""Getting predictions into the system: files, manifests, and HTTP fan-out.

Prediction file format (one JSON object per line):

    {"model_id": "m1", "classes": ["neg", "pos"]}      <- header line
    {"id": "0", "probs": [0.8, 0.2]}                   <- one record per sample
    {"id": "1", "probs": [0.4, 0.6], "label": 1}       <- label is optional

The HTTP wire contract is a single POST endpoint accepting
{"inputs": [string, ...]} and returning {"probs": [[float; K], ...]}.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import requests

from .core import (
    FewShotSet,
    LabelSpace,
    ModelDescriptor,
    OutputMapping,
    PredictionMatrix,
    Registry,
    validate_prediction_matrix,
)
from .errors import (
    ArityMismatch,
    DafteError,
    DuplicateModelId,
    EmptyShots,
    HeaderMismatch,
    MalformedResponse,
    MappingArityMismatch,
    ParseError,
    Timeout,
    Unreachable,
)

REGISTRY_FORMAT = "dafte-registry/1"
CACHE_ENV_VAR = "DAFTE_CACHE_DIR"


# -- prediction files ---------------------------------------------------------------

def store_predictions(
    pred: PredictionMatrix,
    path: str | Path,
    labels: Sequence[int] | None = None,
) -> None:
    """Write a matrix in the prediction-file format (floats round-trip exactly)."""
    if labels is not None and len(labels) != pred.n:
        raise ArityMismatch(f"{len(labels)} labels for {pred.n} rows")
    lines = [json.dumps({"model_id": pred.model_id, "classes": list(pred.label_space.classes)})]
    for i, sid in enumerate(pred.ids()):
        record: dict[str, object] = {"id": sid, "probs": list(pred.rows[i])}
        if labels is not None:
            record["label"] = int(labels[i])
        lines.append(json.dumps(record))
    Path(path).write_text("\n".join(lines) + "\n")


def load_predictions(path: str | Path, expected: LabelSpace) -> PredictionMatrix:
    """Read and validate a prediction file against the expected native classes."""
    path = Path(path)
    try:
        raw_lines = path.read_text().splitlines()
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not raw_lines:
        raise ParseError(f"{path}: empty prediction file")
    header = _parse_line(path, 1, raw_lines[0])
    if "model_id" not in header or "classes" not in header:
        raise ParseError(f"{path}: header must carry model_id and classes")
    if tuple(header["classes"]) != expected.classes:
        raise HeaderMismatch(
            f"{path}: header classes {header['classes']} != expected {list(expected.classes)}"
        )
    ids: list[str] = []
    rows: list[list[float]] = []
    for lineno, line in enumerate(raw_lines[1:], start=2):
        if not line.strip():
            continue
        record = _parse_line(path, lineno, line)
        if "id" not in record or "probs" not in record:
            raise ParseError(f"{path}:{lineno}: record must carry id and probs")
        ids.append(str(record["id"]))
        rows.append(record["probs"])
    if not rows:
        raise ParseError(f"{path}: no prediction records")
    return validate_prediction_matrix(
        rows, expected, model_id=str(header["model_id"]), sample_ids=ids
    )


def load_prediction_labels(path: str | Path) -> dict[str, int]:
    """Gold labels embedded in a prediction file, keyed by sample id."""
    path = Path(path)
    out: dict[str, int] = {}
    lines = path.read_text().splitlines()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        record = _parse_line(path, lineno, line)
        if "label" in record:
            out[str(record["id"])] = int(record["label"])
    return out


def _parse_line(path: Path, lineno: int, line: str) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{lineno}: {exc}") from exc
    if not isinstance(obj, dict):
        raise ParseError(f"{path}:{lineno}: expected a JSON object")
    return obj


# -- label and shot files --------------------------------------------------------------

def load_labels(path: str | Path) -> dict[str, int]:
    """Label file: one {"id": ..., "label": int} JSON object per line."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    out: dict[str, int] = {}
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        record = _parse_line(path, lineno, line)
        if "id" not in record or "label" not in record:
            raise ParseError(f"{path}:{lineno}: expected id and label fields")
        out[str(record["id"])] = int(record["label"])
    if not out:
        raise ParseError(f"{path}: no labels")
    return out


def load_shots(path: str | Path, arity: int) -> FewShotSet:
    """Few-shot file: same per-line schema as a label file, order preserved."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    ids: list[str] = []
    labels: list[int] = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        record = _parse_line(path, lineno, line)
        if "id" not in record or "label" not in record:
            raise ParseError(f"{path}:{lineno}: expected id and label fields")
        ids.append(str(record["id"]))
        labels.append(int(record["label"]))
    if not ids:
        raise EmptyShots(f"{path}: no shots")
    return FewShotSet(sample_ids=tuple(ids), labels=np.array(labels), arity=arity)


# -- registry manifests ------------------------------------------------------------------

def load_registry(path: str | Path) -> Registry:
    """Read and dimension-check a registry manifest.

    The manifest is JSON: target classes plus, per model, id, provenance
    tags, backend, native classes, and a row-major K_target x K_source
    mapping. A missing mapping defaults to identity when the arities match.
    """
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format") != REGISTRY_FORMAT:
        raise ParseError(f"{path}: expected format tag {REGISTRY_FORMAT!r}")
    try:
        target = LabelSpace(tuple(payload["classes"]))
        entries = payload["models"]
    except KeyError as exc:
        raise ParseError(f"{path}: missing field {exc}") from exc
    if not isinstance(entries, list) or not entries:
        raise ParseError(f"{path}: models must be a non-empty list")

    models = []
    seen: set[str] = set()
    for entry in entries:
        try:
            model_id = str(entry["id"])
            native = LabelSpace(tuple(entry["classes"]))
            backend = str(entry["backend"])
            base_tag = str(entry.get("base_model_tag", ""))
            source_tag = str(entry.get("source_dataset_tag", ""))
        except (KeyError, TypeError) as exc:
            raise ParseError(f"{path}: malformed model entry: {exc}") from exc
        if model_id in seen:
            raise DuplicateModelId(f"{path}: duplicate model id {model_id!r}")
        seen.add(model_id)
        flat = entry.get("mapping")
        if flat is None:
            if native.arity != target.arity:
                raise MappingArityMismatch(
                    f"{path}: model {model_id!r} omits mapping but arities differ"
                )
            mapping = OutputMapping(np.eye(native.arity), source=native, target=target)
        else:
            if len(flat) != target.arity * native.arity:
                raise MappingArityMismatch(
                    f"{path}: model {model_id!r} mapping has {len(flat)} entries, "
                    f"expected {target.arity}x{native.arity}"
                )
            matrix = np.array(flat, dtype=np.float64).reshape(target.arity, native.arity)
            mapping = OutputMapping(matrix, source=native, target=target)
        models.append(
            ModelDescriptor(
                id=model_id,
                base_model_tag=base_tag,
                source_dataset_tag=source_tag,
                backend=backend,
                label_space=native,
                mapping=mapping,
            )
        )
    return Registry(label_space=target, models=tuple(models))


def prediction_path(model: ModelDescriptor, preds_dir: str | Path) -> Path:
    """Where a model's prediction file lives under a predictions directory."""
    if model.backend_kind == "file":
        name = model.backend.removeprefix("file:")
        if name:
            candidate = Path(name)
            return candidate if candidate.is_absolute() else Path(preds_dir) / candidate
    return Path(preds_dir) / f"{model.id}.jsonl"


# -- HTTP inference fan-out -----------------------------------------------------------------

@dataclass(frozen=True)
class InferenceRequest:
    """A batchable set of texts to classify under one model."""

    model_id: str
    sample_ids: tuple[str, ...]
    inputs: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.sample_ids:
            raise ArityMismatch("inference request needs at least one sample")
        if len(self.sample_ids) != len(self.inputs):
            raise ArityMismatch("sample ids and inputs must align 1:1")
        if len(set(self.sample_ids)) != len(self.sample_ids):
            raise ArityMismatch("sample ids must be unique")


def cache_key(model_id: str, text: str) -> str:
    """Content hash of one input under one model; stable across runs."""
    digest = hashlib.sha256()
    digest.update(model_id.encode("utf-8"))
    digest.update(b"\x00")
    digest.update(text.encode("utf-8"))
    return digest.hexdigest()


class PredictionCache:
    """Write-once, content-addressed cache of per-sample probability rows.

    Each entry is itself a 2-line prediction file (header plus one record)
    stored under <dir>/<model_id>/<key>.jsonl.
    """

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)

    def _path(self, model_id: str, key: str) -> Path:
        return self.directory / model_id / f"{key}.jsonl"

    def get(self, model_id: str, key: str) -> list[float] | None:
        path = self._path(model_id, key)
        if not path.exists():
            return None
        lines = path.read_text().splitlines()
        record = _parse_line(path, 2, lines[1])
        return list(record["probs"])

    def put(self, model_id: str, key: str, classes: Sequence[str], probs: Sequence[float]) -> None:
        path = self._path(model_id, key)
        if path.exists():  # write-once: never change a returned value
            return
        path.parent.mkdir(parents=True, exist_ok=True)
        body = (
            json.dumps({"model_id": model_id, "classes": list(classes)})
            + "\n"
            + json.dumps({"id": key, "probs": list(probs)})
            + "\n"
        )
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "w") as handle:
                handle.write(body)
            os.replace(tmp, path)
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)


def default_cache_dir() -> Path:
    return Path(os.environ.get(CACHE_ENV_VAR, Path.home() / ".cache" / "dafte"))


@dataclass(frozen=True)
class FetchConfig:
    """Networking knobs for the fan-out; retries are per batch."""

    batch_size: int = 32
    timeout_s: float = 30.0
    retries: int = 2
    parallel: bool = True
    max_in_flight: int = 4


def fetch_predictions(
    endpoint: str,
    request: InferenceRequest,
    label_space: LabelSpace,
    cache: PredictionCache | None = None,
    config: FetchConfig = FetchConfig(),
) -> PredictionMatrix:
    """POST input batches to an inference endpoint and assemble the matrix.

    Row i always corresponds to request.sample_ids[i], whatever order the
    batches complete in; cached keys are never re-fetched, and fresh rows
    are stored write-once. Each failed batch is retried `config.retries`
    times before raising.
    """
    n = len(request.inputs)
    rows: list[list[float] | None] = [None] * n
    keys = [cache_key(request.model_id, text) for text in request.inputs]
    missing: list[int] = []
    for i, key in enumerate(keys):
        hit = cache.get(request.model_id, key) if cache is not None else None
        if hit is not None:
            rows[i] = hit
        else:
            missing.append(i)

    batches = [
        missing[start : start + config.batch_size]
        for start in range(0, len(missing), config.batch_size)
    ]

    def fetch_batch(batch: list[int]) -> tuple[list[int], list[list[float]]]:
        texts = [request.inputs[i] for i in batch]
        return batch, _post_batch(endpoint, texts, label_space.arity, config)

    if batches:
        if config.parallel and len(batches) > 1:
            with ThreadPoolExecutor(max_workers=config.max_in_flight) as pool:
                done = list(pool.map(fetch_batch, batches))
        else:
            done = [fetch_batch(b) for b in batches]
        for batch, probs in done:
            for i, row in zip(batch, probs):
                rows[i] = row
                if cache is not None:
                    cache.put(request.model_id, keys[i], label_space.classes, row)

    assert all(r is not None for r in rows)
    return validate_prediction_matrix(
        rows, label_space, model_id=request.model_id, sample_ids=request.sample_ids
    )


def _post_batch(
    endpoint: str, texts: list[str], arity: int, config: FetchConfig
) -> list[list[float]]:
    last: DafteError | None = None
    for _ in range(config.retries + 1):
        try:
            response = requests.post(
                endpoint, json={"inputs": texts}, timeout=config.timeout_s
            )
        except requests.Timeout:
            last = Timeout(f"{endpoint}: batch timed out after {config.timeout_s}s")
            continue
        except requests.RequestException as exc:
            last = Unreachable(f"{endpoint}: {exc}")
            continue
        if response.status_code != 200:
            last = MalformedResponse(f"{endpoint}: HTTP {response.status_code}")
            continue
        try:
            payload = response.json()
        except ValueError as exc:
            raise MalformedResponse(f"{endpoint}: non-JSON response: {exc}") from exc
        probs = payload.get("probs") if isinstance(payload, dict) else None
        if not isinstance(probs, list) or len(probs) != len(texts):
            raise MalformedResponse(
                f"{endpoint}: expected {len(texts)} prob rows, got "
                f"{len(probs) if isinstance(probs, list) else type(probs).__name__}"
            )
        try:
            validate_prediction_matrix(probs, _arity_space(arity), model_id="response")
        except DafteError as exc:
            raise MalformedResponse(f"{endpoint}: invalid probability rows: {exc}") from exc
        return [list(map(float, row)) for row in probs]
    assert last is not None
    raise last


def _arity_space(arity: int) -> LabelSpace:
    return LabelSpace(tuple(f"c{i}" for i in range(arity)))
