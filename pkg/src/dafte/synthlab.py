"""Synthetic model suites and executable checks of the ensemble guarantees.

The synthetic stand-in for a fine-tuned classifier is a multinomial logistic
model trained on samples from a Gaussian class-conditional domain. Shifting
a domain's means by a controlled magnitude stands in for "domain adjacency":
members fine-tuned nearby should transfer better than members fine-tuned far
away. On these suites the two ensemble guarantees become executable:

* the average ensemble's convex loss never exceeds the members' mean loss
  (Jensen), and
* the best weighted ensemble never loses to the best single member, with the
  weight optimum bracketed by a brute-force simplex grid.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np

from .core import EnsembleWeights, FewShotSet, LabelSpace, PredictionMatrix
from .ensemble import average_ensemble, weighted_ensemble
from .errors import BadConfig, DegenerateSample, ShapeMismatch
from .learners import sweep_weight_grid
from .metrics import accuracy, brier, cross_entropy

PROP2_FORMAT = "dafte-prop2/1"
PROP3_FORMAT = "dafte-prop3/1"
SOUP_FORMAT = "dafte-soup/1"

# Full-batch gradient descent stops at this parameter-change tolerance.
GD_TOL = 1e-6
GD_MAX_STEPS = 10_000
RESAMPLE_RETRIES = 32


def _seed(*parts: int) -> int:
    """Stable, well-mixed seed derived from integer coordinates."""
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def _label_space(arity: int) -> LabelSpace:
    return LabelSpace(tuple(f"c{i}" for i in range(arity)))


# -- domains -----------------------------------------------------------------------

@dataclass(frozen=True)
class DomainConfig:
    """Knobs for one Gaussian class-conditional domain.

    `shift` translates all class means along a direction drawn from
    `shift_seed` (falling back to `seed`); magnitude 0 reproduces the
    reference domain exactly.
    """

    seed: int = 0
    arity: int = 2
    dim: int = 2
    separation: float = 2.0
    cov_scale: float = 1.0
    shift: float = 0.0
    shift_seed: int | None = None

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise BadConfig(f"dim must be >= 1, got {self.dim}")
        if self.arity < 2:
            raise BadConfig(f"arity must be >= 2, got {self.arity}")
        if self.separation <= 0 or self.cov_scale <= 0:
            raise BadConfig("separation and cov_scale must be > 0")
        if self.shift < 0:
            raise BadConfig(f"shift magnitude must be >= 0, got {self.shift}")


@dataclass(frozen=True)
class SyntheticDomain:
    """A concrete domain: per-class means, shared isotropic covariance scale."""

    means: np.ndarray
    cov_scale: float
    shift_vector: np.ndarray
    config: DomainConfig

    @property
    def arity(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def sample(self, n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
        """Draw n labeled points; identical seeds give identical samples."""
        rng = np.random.default_rng(seed)
        y = rng.integers(0, self.arity, n)
        x = self.means[y] + self.cov_scale * rng.standard_normal((n, self.dim))
        return x, y


def gen_domain(config: DomainConfig) -> SyntheticDomain:
    """Deterministically realize a domain from its config.

    Reference means come from the config seed, centered and rescaled so the
    closest pair of class means sits `separation` apart; the whole mean set
    is then translated by the shift vector.
    """
    rng = np.random.default_rng(config.seed)
    means = rng.standard_normal((config.arity, config.dim))
    means -= means.mean(axis=0)
    dists = [
        float(np.linalg.norm(means[i] - means[j]))
        for i in range(config.arity)
        for j in range(i + 1, config.arity)
    ]
    closest = min(dists)
    if closest == 0.0:
        raise BadConfig(f"degenerate means for seed {config.seed}")
    means *= config.separation / closest

    shift_rng = np.random.default_rng(
        config.seed if config.shift_seed is None else config.shift_seed
    )
    direction = shift_rng.standard_normal(config.dim)
    direction /= np.linalg.norm(direction)
    shift_vector = config.shift * direction
    return SyntheticDomain(
        means=means + shift_vector,
        cov_scale=config.cov_scale,
        shift_vector=shift_vector,
        config=config,
    )


# -- synthetic models ----------------------------------------------------------------

@dataclass(frozen=True)
class SyntheticModel:
    """Multinomial logistic classifier with training provenance."""

    w: np.ndarray
    b: np.ndarray
    provenance: dict = field(default_factory=dict)

    @property
    def arity(self) -> int:
        return self.w.shape[0]

    def predict_rows(self, x: np.ndarray) -> np.ndarray:
        logits = x @ self.w.T + self.b
        logits -= logits.max(axis=1, keepdims=True)
        expd = np.exp(logits)
        return expd / expd.sum(axis=1, keepdims=True)

    def as_prediction_matrix(
        self, x: np.ndarray, model_id: str, label_space: LabelSpace | None = None
    ) -> PredictionMatrix:
        space = label_space if label_space is not None else _label_space(self.arity)
        return PredictionMatrix(model_id=model_id, rows=self.predict_rows(x), label_space=space)


def _fit_logistic(x: np.ndarray, y: np.ndarray, arity: int) -> tuple[np.ndarray, np.ndarray]:
    n, dim = x.shape
    onehot = np.zeros((n, arity))
    onehot[np.arange(n), y] = 1.0
    w = np.zeros((arity, dim))
    b = np.zeros(arity)
    # Softmax cross-entropy has curvature at most 0.5 * smax^2 / n along the
    # design matrix; a step just under 2x the inverse of that stays stable.
    design = np.concatenate([x, np.ones((n, 1))], axis=1)
    smax = np.linalg.svd(design, compute_uv=False)[0]
    lr = 1.8 * n / (0.5 * smax**2)
    for _ in range(GD_MAX_STEPS):
        logits = x @ w.T + b
        logits -= logits.max(axis=1, keepdims=True)
        expd = np.exp(logits)
        probs = expd / expd.sum(axis=1, keepdims=True)
        err = (probs - onehot) / n
        grad_w = err.T @ x
        grad_b = err.sum(axis=0)
        w -= lr * grad_w
        b -= lr * grad_b
        step = max(lr * np.abs(grad_w).max(), lr * np.abs(grad_b).max())
        if step < GD_TOL:
            break
    return w, b


def train_synthetic(domain: SyntheticDomain, n: int, seed: int) -> SyntheticModel:
    """Fit the logistic stand-in on n fresh samples from the domain.

    Resamples (bounded) until at least two classes are present, then runs
    full-batch gradient descent to the package tolerance. Deterministic in
    (domain, n, seed).
    """
    if n < 2:
        raise DegenerateSample(f"need n >= 2 training samples, got {n}")
    x = y = None
    for attempt in range(RESAMPLE_RETRIES):
        x, y = domain.sample(n, _seed(seed, attempt) if attempt else seed)
        if np.unique(y).size >= 2:
            break
    else:
        raise DegenerateSample(f"could not draw 2 classes in {RESAMPLE_RETRIES} tries")
    w, b = _fit_logistic(x, y, domain.arity)
    return SyntheticModel(
        w=w,
        b=b,
        provenance={"domain_seed": domain.config.seed, "shift": domain.config.shift,
                    "n": n, "seed": seed},
    )


def uniform_soup(models: Sequence[SyntheticModel]) -> SyntheticModel:
    """Parameter-wise mean of same-shape models (isotropic merging).

    Unlike output averaging this requires matching architectures; softmax of
    the mean parameters is generally not the mean of the softmaxes.
    """
    if not models:
        raise ShapeMismatch("need at least one model to soup")
    first = models[0]
    for m in models[1:]:
        if m.w.shape != first.w.shape or m.b.shape != first.b.shape:
            raise ShapeMismatch("soup requires matching parameter shapes")
    w = np.mean([m.w for m in models], axis=0)
    b = np.mean([m.b for m in models], axis=0)
    return SyntheticModel(w=w, b=b, provenance={"soup_of": len(models)})


# -- suite configs ---------------------------------------------------------------------

@dataclass(frozen=True)
class SuiteConfig:
    """Shared suite shape: a reference target domain plus shifted members."""

    seed: int = 1
    n_models: int = 5
    shift: float = 1.0
    arity: int = 2
    dim: int = 2
    separation: float = 2.0
    cov_scale: float = 1.0
    n_train: int = 128
    n_test: int = 1000

    def __post_init__(self) -> None:
        if self.n_models < 1:
            raise BadConfig("n_models must be >= 1")
        if self.n_train < 2 or self.n_test < 1:
            raise BadConfig("n_train must be >= 2 and n_test >= 1")
        if self.shift < 0:
            raise BadConfig("shift must be >= 0")


def _build_members(
    cfg: SuiteConfig, trial: int, shifts: Sequence[float]
) -> tuple[SyntheticDomain, list[SyntheticModel]]:
    ref_seed = _seed(cfg.seed, trial, 0)
    target = gen_domain(
        DomainConfig(
            seed=ref_seed, arity=cfg.arity, dim=cfg.dim,
            separation=cfg.separation, cov_scale=cfg.cov_scale,
        )
    )
    members = []
    for i, shift in enumerate(shifts):
        domain = gen_domain(
            DomainConfig(
                seed=ref_seed, arity=cfg.arity, dim=cfg.dim,
                separation=cfg.separation, cov_scale=cfg.cov_scale,
                shift=shift, shift_seed=_seed(cfg.seed, trial, 10 + i),
            )
        )
        members.append(train_synthetic(domain, cfg.n_train, _seed(cfg.seed, trial, 100 + i)))
    return target, members


def _member_preds(
    members: Sequence[SyntheticModel], x: np.ndarray, space: LabelSpace
) -> list[PredictionMatrix]:
    return [m.as_prediction_matrix(x, f"member-{i}", space) for i, m in enumerate(members)]


# -- average-ensemble guarantee ----------------------------------------------------------

@dataclass(frozen=True)
class Prop2Trial:
    trial: int
    ce_margin: float
    brier_margin: float
    disagree: bool
    ok: bool


@dataclass(frozen=True)
class Prop2Report:
    config: SuiteConfig
    trials: tuple[Prop2Trial, ...]
    slack: float
    runtime_s: float

    @property
    def all_ok(self) -> bool:
        return all(t.ok for t in self.trials)

    def to_dict(self) -> dict:
        return {
            "format": PROP2_FORMAT,
            "config": vars(self.config) | {"kind": "average-ensemble-guarantee"},
            "slack": self.slack,
            "all_ok": self.all_ok,
            "runtime_s": self.runtime_s,
            "trials": [vars(t) for t in self.trials],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def write_margins_csv(self, out: IO[str]) -> None:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["trial", "ce_margin", "brier_margin", "disagree", "ok"])
        for t in self.trials:
            writer.writerow([t.trial, f"{t.ce_margin:.12e}", f"{t.brier_margin:.12e}",
                             int(t.disagree), int(t.ok)])


def verify_prop2(cfg: SuiteConfig = SuiteConfig(), trials: int = 100, slack: float = 1e-12
                 ) -> Prop2Report:
    """Check, per trial, that the average ensemble's loss is at most the
    members' mean loss for both convex losses, strictly so when members
    disagree. Margins (mean member loss minus ensemble loss) are reported.
    """
    if trials < 1:
        raise BadConfig("trials must be >= 1")
    space = _label_space(cfg.arity)
    started = time.perf_counter()
    results = []
    shifts = [cfg.shift] * cfg.n_models
    for trial in range(trials):
        target, members = _build_members(cfg, trial, shifts)
        x, y = target.sample(cfg.n_test, _seed(cfg.seed, trial, 1))
        preds = _member_preds(members, x, space)
        ens = average_ensemble(preds)
        ce_margin = float(np.mean([cross_entropy(p, y) for p in preds]) - cross_entropy(ens, y))
        brier_margin = float(np.mean([brier(p, y) for p in preds]) - brier(ens, y))
        disagree = any(not np.array_equal(p.rows, preds[0].rows) for p in preds[1:])
        ok = ce_margin >= -slack and brier_margin >= -slack
        if disagree:
            ok = ok and ce_margin > 0 and brier_margin > 0
        results.append(Prop2Trial(trial, ce_margin, brier_margin, disagree, ok))
    return Prop2Report(
        config=cfg,
        trials=tuple(results),
        slack=slack,
        runtime_s=time.perf_counter() - started,
    )


# -- weighted-ensemble guarantee -----------------------------------------------------------

@dataclass(frozen=True)
class Prop3Config:
    """Suite shape for the weight-oracle check.

    Member shifts default to 0, step, 2*step, ... with `include_unshifted`;
    the zero-shift member realizes the "a domain right next to the target"
    regime in which the oracle should come close to the fully fine-tuned
    optimum.
    """

    seed: int = 1
    n_models: int = 3
    shift_step: float = 1.0
    include_unshifted: bool = True
    resolution: float = 0.05
    instances: int = 20
    arity: int = 2
    dim: int = 2
    separation: float = 2.0
    cov_scale: float = 1.0
    n_shots: int = 256
    n_member_train: int = 400
    n_full_train: int = 2000
    n_test: int = 1000

    def __post_init__(self) -> None:
        if self.n_models < 1:
            raise BadConfig("n_models must be >= 1")
        if self.instances < 1:
            raise BadConfig("instances must be >= 1")

    def member_shifts(self) -> list[float]:
        start = 0 if self.include_unshifted else 1
        return [self.shift_step * (start + i) for i in range(self.n_models)]


@dataclass(frozen=True)
class Prop3Instance:
    instance: int
    oracle_weights: tuple[float, ...]
    oracle_shots_ce: float
    min_member_shots_ce: float
    eps_grid: float
    oracle_test_ce: float
    member_test_ce: tuple[float, ...]
    fft_star_ce: float
    mu_terms: tuple[float, ...]
    gap_to_fft: float
    ok: bool


@dataclass(frozen=True)
class Prop3Report:
    config: Prop3Config
    instances: tuple[Prop3Instance, ...]
    runtime_s: float

    @property
    def all_ok(self) -> bool:
        return all(i.ok for i in self.instances)

    def to_dict(self) -> dict:
        return {
            "format": PROP3_FORMAT,
            "config": vars(self.config) | {"kind": "weight-oracle-guarantee"},
            "all_ok": self.all_ok,
            "runtime_s": self.runtime_s,
            "instances": [vars(i) for i in self.instances],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def write_margins_csv(self, out: IO[str]) -> None:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(
            ["instance", "oracle_shots_ce", "min_member_shots_ce", "eps_grid",
             "oracle_test_ce", "fft_star_ce", "gap_to_fft", "ok"]
        )
        for i in self.instances:
            writer.writerow(
                [i.instance, f"{i.oracle_shots_ce:.9f}", f"{i.min_member_shots_ce:.9f}",
                 f"{i.eps_grid:.9f}", f"{i.oracle_test_ce:.9f}", f"{i.fft_star_ce:.9f}",
                 f"{i.gap_to_fft:.9f}", int(i.ok)]
            )


def _grid_neighbor_eps(swept: list[tuple[tuple[float, ...], float]], resolution: float) -> float:
    """Largest loss change across one grid step (one unit of mass moved)."""
    steps = round(1.0 / resolution)
    by_comp = {tuple(round(w * steps) for w in weight): loss for weight, loss in swept}
    eps = 0.0
    for comp, loss in by_comp.items():
        for i in range(len(comp)):
            if comp[i] == 0:
                continue
            for j in range(len(comp)):
                if i == j:
                    continue
                neighbor = list(comp)
                neighbor[i] -= 1
                neighbor[j] += 1
                other = by_comp.get(tuple(neighbor))
                if other is not None:
                    eps = max(eps, abs(loss - other))
    return eps


def verify_prop3(cfg: Prop3Config = Prop3Config()) -> Prop3Report:
    """Check the weight-oracle inequality on synthetic instances.

    Per instance: the grid-oracle weighted ensemble's shot loss must not
    exceed the best single member's shot loss by more than one grid step of
    loss variation (the member vertices are themselves grid points, so the
    margin is expected to be <= 0). The report also measures, on held-out
    target data, the gap between the oracle ensemble and the best model
    fully fitted on the target domain, plus each member's excess over it.
    """
    space = _label_space(cfg.arity)
    started = time.perf_counter()
    shifts = cfg.member_shifts()
    out = []
    for j in range(cfg.instances):
        target, members = _build_members(
            SuiteConfig(
                seed=cfg.seed, n_models=cfg.n_models, shift=0.0, arity=cfg.arity,
                dim=cfg.dim, separation=cfg.separation, cov_scale=cfg.cov_scale,
                n_train=cfg.n_member_train, n_test=cfg.n_test,
            ),
            j,
            shifts,
        )
        xs, ys = target.sample(cfg.n_shots, _seed(cfg.seed, j, 2))
        shots_preds = _member_preds(members, xs, space)
        swept = sweep_weight_grid(shots_preds, ys, cfg.resolution)
        best_weight, best_loss = swept[0]
        for weight, loss in swept[1:]:
            if loss < best_loss:
                best_weight, best_loss = weight, loss
        eps_grid = _grid_neighbor_eps(swept, cfg.resolution)
        member_shots_ce = [cross_entropy(p, ys) for p in shots_preds]

        xt, yt = target.sample(cfg.n_test, _seed(cfg.seed, j, 3))
        test_preds = _member_preds(members, xt, space)
        oracle_test = weighted_ensemble(test_preds, EnsembleWeights.shared(best_weight, cfg.arity))
        member_test_ce = [cross_entropy(p, yt) for p in test_preds]

        ffts = [
            train_synthetic(target, cfg.n_full_train, _seed(cfg.seed, j, 200 + i))
            for i in range(cfg.n_models)
        ]
        fft_ce = [cross_entropy(m.as_prediction_matrix(xt, f"fft-{i}", space), yt)
                  for i, m in enumerate(ffts)]
        fft_star = min(fft_ce)
        mu = [ce - fft_star for ce in fft_ce]
        oracle_test_ce = cross_entropy(oracle_test, yt)

        ok = best_loss <= min(member_shots_ce) + eps_grid
        out.append(
            Prop3Instance(
                instance=j,
                oracle_weights=best_weight,
                oracle_shots_ce=best_loss,
                min_member_shots_ce=min(member_shots_ce),
                eps_grid=eps_grid,
                oracle_test_ce=oracle_test_ce,
                member_test_ce=tuple(member_test_ce),
                fft_star_ce=fft_star,
                mu_terms=tuple(mu),
                gap_to_fft=oracle_test_ce - fft_star,
                ok=ok,
            )
        )
    return Prop3Report(config=cfg, instances=tuple(out), runtime_s=time.perf_counter() - started)


# -- soup vs output ensembling ---------------------------------------------------------------

@dataclass(frozen=True)
class SoupComparison:
    seed: int
    soup_accuracy: float
    ensemble_accuracy: float


def compare_soup(cfg: SuiteConfig = SuiteConfig(), seeds: int = 20) -> list[SoupComparison]:
    """Accuracy of parameter souping vs output averaging, one row per seed.

    Reporting only: at this scale neither method dominates and no sign is
    asserted.
    """
    space = _label_space(cfg.arity)
    rows = []
    shifts = [cfg.shift] * cfg.n_models
    for s in range(seeds):
        target, members = _build_members(cfg, s, shifts)
        x, y = target.sample(cfg.n_test, _seed(cfg.seed, s, 1))
        souped = uniform_soup(members)
        soup_acc = accuracy(souped.as_prediction_matrix(x, "soup", space), y)
        ens_acc = accuracy(average_ensemble(_member_preds(members, x, space)), y)
        rows.append(SoupComparison(seed=s, soup_accuracy=soup_acc, ensemble_accuracy=ens_acc))
    return rows


@dataclass(frozen=True)
class FewShotComparison:
    seed: int
    lr_accuracy: float
    rf_accuracy: float
    zero_shot_accuracy: float
    dominant_accuracy: float


def compare_fewshot(
    cfg: SuiteConfig = SuiteConfig(seed=7, n_models=5, n_train=200),
    *,
    dominant_shift: float = 0.0,
    weak_shift: float = 3.0,
    n_shots: int = 128,
    seeds: int = 20,
) -> list[FewShotComparison]:
    """Held-out accuracy of few-shot weighting vs zero-shot averaging.

    The suite pairs one member fine-tuned right on the target with weak,
    far-shifted members, so learned weights have something to find: the
    average ensemble is diluted while the weight learners can concentrate on
    the dominant member.
    """
    from .learners import LRConfig, RFConfig, fit_lr, fit_rf, predict_rf

    space = _label_space(cfg.arity)
    shifts = [dominant_shift] + [weak_shift] * (cfg.n_models - 1)
    rows = []
    for s in range(seeds):
        target, members = _build_members(cfg, s, shifts)
        xs, ys = target.sample(n_shots, _seed(cfg.seed, s, 2))
        xt, yt = target.sample(cfg.n_test, _seed(cfg.seed, s, 3))
        shots = FewShotSet(tuple(str(i) for i in range(n_shots)), ys, cfg.arity)
        shot_preds = _member_preds(members, xs, space)
        test_preds = _member_preds(members, xt, space)
        weights = fit_lr(shot_preds, shots, LRConfig(seed=s))
        forest = fit_rf(shot_preds, shots, RFConfig(seed=s))
        rows.append(
            FewShotComparison(
                seed=s,
                lr_accuracy=accuracy(weighted_ensemble(test_preds, weights), yt),
                rf_accuracy=accuracy(predict_rf(forest, test_preds), yt),
                zero_shot_accuracy=accuracy(average_ensemble(test_preds), yt),
                dominant_accuracy=accuracy(test_preds[0], yt),
            )
        )
    return rows


def write_soup_csv(out: IO[str], rows: Sequence[SoupComparison]) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["seed", "soup_accuracy", "ensemble_accuracy"])
    for r in rows:
        writer.writerow([r.seed, f"{r.soup_accuracy:.6f}", f"{r.ensemble_accuracy:.6f}"])


def load_suite_config(path) -> SuiteConfig:
    """Read a SuiteConfig from a JSON file of keyword fields."""
    return _config_from_file(path, SuiteConfig)


def load_prop3_config(path) -> Prop3Config:
    """Read a Prop3Config from a JSON file of keyword fields."""
    return _config_from_file(path, Prop3Config)


def _config_from_file(path, cls):
    from pathlib import Path

    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise BadConfig(f"{path}: {exc}") from exc
    if not isinstance(payload, dict):
        raise BadConfig(f"{path}: expected a JSON object of config fields")
    known = {f.name for f in cls.__dataclass_fields__.values()}
    unknown = set(payload) - known
    if unknown:
        raise BadConfig(f"{path}: unknown config fields {sorted(unknown)}")
    return cls(**payload)


def measure_shift_decay(
    cfg: SuiteConfig, shifts: Sequence[float], seeds: int = 20
) -> list[float]:
    """Mean accuracy of a reference-domain model on increasingly shifted test
    data, averaged over seeds. Expected non-increasing in the shift."""
    space = _label_space(cfg.arity)
    means = []
    for shift in shifts:
        accs = []
        for s in range(seeds):
            ref_seed = _seed(cfg.seed, s, 0)
            reference = gen_domain(
                DomainConfig(seed=ref_seed, arity=cfg.arity, dim=cfg.dim,
                             separation=cfg.separation, cov_scale=cfg.cov_scale)
            )
            shifted = gen_domain(
                DomainConfig(seed=ref_seed, arity=cfg.arity, dim=cfg.dim,
                             separation=cfg.separation, cov_scale=cfg.cov_scale,
                             shift=shift, shift_seed=_seed(cfg.seed, s, 7))
            )
            model = train_synthetic(reference, cfg.n_train, _seed(cfg.seed, s, 8))
            x, y = shifted.sample(cfg.n_test, _seed(cfg.seed, s, 9))
            accs.append(accuracy(model.as_prediction_matrix(x, "reference", space), y))
        means.append(float(np.mean(accs)))
    return means
