"""Grouped 3-fold cross-validation, accuracy/latency measurement and report rendering."""

from __future__ import annotations

import json
import logging
import platform
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np

from .classifiers import DISPLAY_NAMES, ClassifierSpec, TrainedModel, predict_indices, train
from .dataset import CLASSES, DatasetManifest
from .errors import ShapeError, StratificationError
from .featurestore import FeatureMatrix
from .pipeline import DEFAULT_PCA_ENERGY, DEFAULT_VAR_THRESHOLD, PipelineModel, fit_pipeline, fit_preprocessor
from .classifiers.base import component_rng

log = logging.getLogger(__name__)

REPORT_SCHEMA = "serbench-report/1"
TIME_FIELDS = ("time_ms",)

# -- timing instrumentation --

TIMING_HOOKS: list[Callable[[str], None]] = []
_in_timed_region = False


def in_timed_region() -> bool:
    return _in_timed_region


@contextmanager
def _timed_region():
    global _in_timed_region
    for hook in TIMING_HOOKS:
        hook("enter")
    _in_timed_region = True
    try:
        yield
    finally:
        _in_timed_region = False
        for hook in TIMING_HOOKS:
            hook("exit")


@contextmanager
def _single_thread():
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        yield
        return
    with threadpool_limits(limits=1):
        yield


def time_predict(model: TrainedModel, X: np.ndarray, repeats: int = 1) -> tuple[float, np.ndarray]:
    """Wall time in ms of one classifier predict over ``X`` (mean over ``repeats``).

    One untimed warm-up call runs first; its predictions are returned too.
    Only the classifier is timed: ``X`` must already be transformed.
    """
    with _single_thread():
        warm = predict_indices(model, X)
        times = []
        for _ in range(max(1, repeats)):
            with _timed_region():
                t0 = time.perf_counter_ns()
                predict_indices(model, X)
                t1 = time.perf_counter_ns()
            times.append(max(t1 - t0, 1) / 1e6)
    return float(np.mean(times)), warm


# -- folds --

@dataclass(frozen=True)
class FoldPlan:
    k: int
    seed: int
    folds: tuple[tuple[str, ...], ...]
    stratified: bool = True

    def fold_of(self) -> dict[str, int]:
        return {fid: i for i, ids in enumerate(self.folds) for fid in ids}


def make_folds_from_labels(files: Mapping[str, str], k: int = 3, seed: int = 0) -> FoldPlan:
    """Stratified file-level folds: seeded shuffle within each class, then round-robin."""
    by_class: dict[str, list[str]] = {}
    for fid, label in files.items():
        by_class.setdefault(label, []).append(fid)
    folds: list[list[str]] = [[] for _ in range(k)]
    for label in sorted(by_class):
        ids = sorted(by_class[label])
        if len(ids) < k:
            raise StratificationError(f"class {label!r} has {len(ids)} training files, need at least {k}")
        class_index = CLASSES.index(label) if label in CLASSES else len(CLASSES) + sorted(by_class).index(label)
        perm = component_rng(seed, class_index).permutation(len(ids))
        for pos, i in enumerate(perm):
            folds[pos % k].append(ids[i])
    return FoldPlan(k, seed, tuple(tuple(sorted(f)) for f in folds))


def make_folds(manifest: DatasetManifest, k: int = 3, seed: int = 0) -> FoldPlan:
    return make_folds_from_labels({e.source_id: e.label for e in manifest.split("train")}, k, seed)


def folds_for_features(features: FeatureMatrix, k: int = 3, seed: int = 0) -> FoldPlan:
    train = features.split("train")
    files = dict(zip(train.file_ids.tolist(), train.labels.tolist()))
    return make_folds_from_labels(files, k, seed)


# -- metrics --

def accuracy(pred, truth) -> float:
    pred = np.asarray(pred, dtype=object)
    truth = np.asarray(truth, dtype=object)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise ShapeError(f"prediction shape {pred.shape} does not match truth {truth.shape}")
    if pred.size == 0:
        raise ShapeError("accuracy needs at least one instance")
    return float(np.mean(pred == truth))


def file_majority(pred_idx: np.ndarray, file_ids: np.ndarray, n_classes: int) -> dict[str, int]:
    """Majority class index per file; ties go to the smaller index."""
    out = {}
    for fid in np.unique(file_ids):
        votes = np.bincount(pred_idx[file_ids == fid], minlength=n_classes)
        out[fid] = int(np.argmax(votes))
    return out


def file_accuracy(pred_idx, file_ids, labels, classes) -> float:
    majority = file_majority(np.asarray(pred_idx), np.asarray(file_ids), len(classes))
    truth = {fid: lab for fid, lab in zip(file_ids, labels)}
    hits = [classes[idx] == truth[fid] for fid, idx in majority.items()]
    return float(np.mean(hits))


# -- report --

def _mean_std(values):
    if not values:
        return float("nan"), float("nan")
    a = np.asarray(values, dtype=np.float64)
    return float(a.mean()), float(a.std())


@dataclass
class ReportRow:
    algorithm: str
    classifier: str
    accuracy: list[float] = field(default_factory=list)  # percent, one per fold
    file_accuracy: list[float] = field(default_factory=list)
    time_ms: list[float] = field(default_factory=list)
    error: str | None = None

    def headline(self, granularity: str) -> list[float]:
        return self.file_accuracy if granularity == "file" else self.accuracy


@dataclass
class EvalReport:
    rows: list[ReportRow] = field(default_factory=list)
    granularity: str = "frame"
    scoring: str = "test"
    n_folds: int = 3
    seed: int = 0
    config: dict = field(default_factory=dict)
    folds: list[dict] = field(default_factory=list)
    environment: str = ""

    def row(self, algorithm: str) -> ReportRow:
        for r in self.rows:
            if r.algorithm == algorithm:
                return r
        raise KeyError(algorithm)

    def to_dict(self) -> dict:
        rows = []
        for r in self.rows:
            acc_m, acc_s = _mean_std(r.headline(self.granularity))
            frame_m, frame_s = _mean_std(r.accuracy)
            file_m, file_s = _mean_std(r.file_accuracy)
            t_m, t_s = _mean_std(r.time_ms)
            rows.append(
                {
                    "algorithm": r.algorithm,
                    "classifier": r.classifier,
                    "accuracy": {"mean": acc_m, "std": acc_s},
                    "frame_accuracy": {"mean": frame_m, "std": frame_s},
                    "file_accuracy": {"mean": file_m, "std": file_s},
                    "time_ms": {"mean": t_m, "std": t_s},
                    "folds": {"accuracy": r.accuracy, "file_accuracy": r.file_accuracy, "time_ms": r.time_ms},
                    "error": r.error,
                }
            )
        return {
            "schema": REPORT_SCHEMA,
            "granularity": self.granularity,
            "scoring": self.scoring,
            "n_folds": self.n_folds,
            "seed": self.seed,
            "config": self.config,
            "environment": self.environment,
            "fold_summaries": self.folds,
            "rows": rows,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        doc = json.loads(text)
        if doc.get("schema") != REPORT_SCHEMA:
            raise ValueError(f"unsupported report schema {doc.get('schema')!r}")
        rows = [
            ReportRow(
                algorithm=r["algorithm"],
                classifier=r["classifier"],
                accuracy=r["folds"]["accuracy"],
                file_accuracy=r["folds"]["file_accuracy"],
                time_ms=r["folds"]["time_ms"],
                error=r.get("error"),
            )
            for r in doc["rows"]
        ]
        return cls(rows, doc["granularity"], doc["scoring"], doc["n_folds"], doc["seed"], doc["config"],
                   doc.get("fold_summaries", []), doc.get("environment", ""))


def strip_timing(doc):
    """Copy of a report dict with every timing field removed (for determinism checks)."""
    if isinstance(doc, dict):
        return {k: strip_timing(v) for k, v in doc.items() if k not in TIME_FIELDS}
    if isinstance(doc, list):
        return [strip_timing(v) for v in doc]
    return doc


def _fmt(values) -> str:
    m, s = _mean_std(values)
    return f"{m:.2f} ± {s:.2f}"


def render_markdown(report: EvalReport) -> str:
    lines = ["| Classifier | Time [ms] | Accuracy [%] |", "|---|---:|---:|"]
    for r in report.rows:
        if r.error and not r.accuracy:
            lines.append(f"| {r.classifier} | failed | {r.error} |")
        else:
            lines.append(f"| {r.classifier} | {_fmt(r.time_ms)} | {_fmt(r.headline(report.granularity))} |")
    return "\n".join(lines) + "\n"


def render_report(report: EvalReport, fmt: str = "md") -> str:
    if fmt in ("md", "markdown"):
        return render_markdown(report)
    if fmt == "json":
        return report.to_json()
    raise ValueError(f"unknown report format {fmt!r}")


# -- benchmark --

@dataclass
class EvalConfig:
    var_threshold: float = DEFAULT_VAR_THRESHOLD
    pca_energy: float = DEFAULT_PCA_ENERGY
    k: int = 3
    seed: int = 0
    scoring: str = "test"  # "test": score the test split; "validation": score the held-out fold
    granularity: str = "frame"
    timing_repeats: int = 1


def fold_training_rows(features: FeatureMatrix, plan: FoldPlan, fold: int) -> np.ndarray:
    """Mask of training-split rows whose file is not in ``fold``."""
    fold_of = plan.fold_of()
    in_fold = np.array([fold_of.get(fid, -1) == fold for fid in features.file_ids], dtype=bool)
    return (features.splits == "train") & ~in_fold


def fit_fold(features: FeatureMatrix, plan: FoldPlan, fold: int, spec: ClassifierSpec, cfg: EvalConfig) -> PipelineModel:
    tr = features.subset(fold_training_rows(features, plan, fold))
    return fit_pipeline(tr.X, tr.labels, spec, cfg.var_threshold, cfg.pca_energy, splits=tr.splits)


def _environment() -> str:
    return f"{platform.system()} {platform.machine()} python {platform.python_version()}; single-threaded predict timing"


def benchmark_all(
    features: FeatureMatrix,
    specs: Iterable[ClassifierSpec],
    cfg: EvalConfig | None = None,
    progress: Callable[[str], None] | None = None,
) -> EvalReport:
    """Cross-validated accuracy and predict latency for every classifier spec.

    For each fold the scaler, variance mask and PCA are fitted on the other
    folds' training frames, the classifier is trained on the same rows and
    then scores either the test split (default) or the held-out fold.
    """
    cfg = cfg or EvalConfig()
    specs = list(specs)
    plan = folds_for_features(features, cfg.k, cfg.seed)
    fold_of = plan.fold_of()
    report = EvalReport(
        rows=[ReportRow(s.algorithm, DISPLAY_NAMES[s.algorithm]) for s in specs],
        granularity=cfg.granularity,
        scoring=cfg.scoring,
        n_folds=cfg.k,
        seed=cfg.seed,
        config={k: v for k, v in asdict(cfg).items() if k != "timing_repeats"},
        environment=_environment(),
    )
    for fold in range(cfg.k):
        tr = features.subset(fold_training_rows(features, plan, fold))
        if cfg.scoring == "test":
            ev = features.split("test")
        else:
            held = np.array([fold_of.get(fid, -1) == fold for fid in features.file_ids], dtype=bool)
            ev = features.subset((features.splits == "train") & held)
        if len(ev) == 0:
            raise ShapeError(f"fold {fold}: nothing to evaluate for scoring mode {cfg.scoring!r}")
        pre = fit_preprocessor(tr.X, cfg.var_threshold, cfg.pca_energy, splits=tr.splits)
        Xtr = pre.transform(tr.X)
        Xev = pre.transform(ev.X)
        report.folds.append(
            {
                "fold": fold,
                "train_rows": len(tr),
                "eval_rows": len(ev),
                "kept_features": int(pre.mask.keep.sum()),
                "pca_components": pre.pca.n_components,
            }
        )
        for spec, row in zip(specs, report.rows):
            if progress:
                progress(f"fold {fold + 1}/{cfg.k} {row.classifier}")
            try:
                model = train(spec, Xtr, tr.labels)
                elapsed, pred_idx = time_predict(model, Xev, cfg.timing_repeats)
            except Exception as exc:  # one failing classifier must not sink the others
                log.exception("%s failed on fold %d", row.classifier, fold)
                row.error = f"{type(exc).__name__}: {exc}"
                continue
            labels = np.asarray(model.classes, dtype=object)[pred_idx]
            row.accuracy.append(100.0 * accuracy(labels, ev.labels))
            row.file_accuracy.append(100.0 * file_accuracy(pred_idx, ev.file_ids, ev.labels, model.classes))
            row.time_ms.append(elapsed)
    return report
