"""Min-max scaling, low-variance filter and PCA, plus the model file format."""

from __future__ import annotations

import base64
import json
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .classifiers import ClassifierSpec, TrainedModel, decision_scores, predict_indices, train
from .errors import DegenerateError, FitError, IntegrityError, LeakError, ParameterError, VersionError
from .ioutil import atomic_write

DEFAULT_VAR_THRESHOLD = 1e-8
DEFAULT_PCA_ENERGY = 0.95
SCHEMA_VERSION = 1
MAGIC_PREFIX = b"sesa-pipeline/"
MAGIC = MAGIC_PREFIX + str(SCHEMA_VERSION).encode() + b"\n"


@dataclass(frozen=True)
class ScalerParams:
    min: np.ndarray
    max: np.ndarray


@dataclass(frozen=True)
class VarianceMask:
    keep: np.ndarray  # bool per input feature
    threshold: float
    variances: np.ndarray


@dataclass(frozen=True)
class PcaBasis:
    mean: np.ndarray
    components: np.ndarray  # (k, d), orthonormal rows
    explained_variance_ratio: np.ndarray

    @property
    def n_components(self) -> int:
        return self.components.shape[0]


def fit_minmax(rows) -> ScalerParams:
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise FitError("min-max scaling needs at least one training row")
    return ScalerParams(rows.min(axis=0), rows.max(axis=0))


def apply_minmax(params: ScalerParams, rows) -> np.ndarray:
    """Affine map onto [0, 1] over the training range; no clamping, constant columns map to 0."""
    rows = np.asarray(rows, dtype=np.float64)
    span = params.max - params.min
    safe = np.where(span > 0, span, 1.0)
    return np.where(span > 0, (rows - params.min) / safe, 0.0)


def fit_variance_filter(rows, threshold: float = DEFAULT_VAR_THRESHOLD) -> VarianceMask:
    if threshold < 0:
        raise ParameterError(f"variance threshold must be non-negative, got {threshold}")
    rows = np.asarray(rows, dtype=np.float64)
    if rows.shape[0] == 0:
        raise FitError("variance filter needs at least one row")
    var = rows.var(axis=0)
    keep = var > threshold
    if not keep.any():
        raise DegenerateError(f"every feature has variance <= {threshold}")
    return VarianceMask(keep, float(threshold), var)


def apply_mask(mask: VarianceMask, rows) -> np.ndarray:
    return np.asarray(rows, dtype=np.float64)[:, mask.keep]


def fit_pca(rows, energy: float = DEFAULT_PCA_ENERGY) -> PcaBasis:
    """Principal axes of the sample covariance, keeping the fewest that reach ``energy``.

    Each component's sign is fixed so that its largest-magnitude entry is positive.
    """
    if not 0 < energy <= 1:
        raise ParameterError(f"PCA energy must lie in (0, 1], got {energy}")
    rows = np.asarray(rows, dtype=np.float64)
    if rows.shape[0] < 2:
        raise FitError("PCA needs at least two rows")
    mean = rows.mean(axis=0)
    centered = rows - mean
    cov = centered.T @ centered / (rows.shape[0] - 1)
    evals, evecs = np.linalg.eigh(cov)
    evals, evecs = evals[::-1], evecs[:, ::-1]
    evals = np.maximum(evals, 0.0)
    total = evals.sum()
    if not total > 0:
        raise DegenerateError("training data has zero total variance")
    ratio = evals / total
    cum = np.cumsum(ratio)
    k = int(np.searchsorted(cum, energy - 1e-12) + 1)
    k = min(k, len(evals))
    comps = evecs[:, :k].T.copy()
    pivot = np.argmax(np.abs(comps), axis=1)
    signs = np.sign(comps[np.arange(k), pivot])
    comps *= signs[:, None]
    return PcaBasis(mean, comps, ratio[:k].copy())


def apply_pca(basis: PcaBasis, rows) -> np.ndarray:
    return (np.asarray(rows, dtype=np.float64) - basis.mean) @ basis.components.T


@dataclass
class PipelineModel:
    scaler: ScalerParams
    mask: VarianceMask
    pca: PcaBasis
    classifier: TrainedModel
    labels: tuple
    schema_version: int = SCHEMA_VERSION

    def transform(self, X) -> np.ndarray:
        return apply_pca(self.pca, apply_mask(self.mask, apply_minmax(self.scaler, X)))

    def decision_scores(self, X) -> np.ndarray:
        return decision_scores(self.classifier, self.transform(X))

    def predict(self, X) -> np.ndarray:
        return np.asarray(self.classifier.classes, dtype=object)[predict_indices(self.classifier, self.transform(X))]

    @property
    def dims(self) -> tuple[int, int, int]:
        return len(self.scaler.min), int(self.mask.keep.sum()), self.pca.n_components


@dataclass(frozen=True)
class Preprocessor:
    scaler: ScalerParams
    mask: VarianceMask
    pca: PcaBasis

    def transform(self, X) -> np.ndarray:
        return apply_pca(self.pca, apply_mask(self.mask, apply_minmax(self.scaler, X)))


def _check_train_split(splits):
    if splits is None:
        return
    bad = np.asarray(splits, dtype=object) != "train"
    if bad.any():
        raise LeakError(f"{int(bad.sum())} rows passed to fit are not training rows")


def fit_preprocessor(
    X, var_threshold: float = DEFAULT_VAR_THRESHOLD, pca_energy: float = DEFAULT_PCA_ENERGY, splits=None
) -> Preprocessor:
    _check_train_split(splits)
    scaler = fit_minmax(X)
    scaled = apply_minmax(scaler, X)
    mask = fit_variance_filter(scaled, var_threshold)
    filtered = apply_mask(mask, scaled)
    return Preprocessor(scaler, mask, fit_pca(filtered, pca_energy))


def fit_pipeline(
    X,
    y,
    spec: ClassifierSpec,
    var_threshold: float = DEFAULT_VAR_THRESHOLD,
    pca_energy: float = DEFAULT_PCA_ENERGY,
    splits=None,
    preprocessor: Preprocessor | None = None,
) -> PipelineModel:
    """Fit scaler, variance mask, PCA and one classifier on training rows only."""
    _check_train_split(splits)
    pre = preprocessor or fit_preprocessor(X, var_threshold, pca_energy)
    clf = train(spec, pre.transform(X), y)
    return PipelineModel(pre.scaler, pre.mask, pre.pca, clf, tuple(clf.classes))


# -- model file --

def _encode(obj):
    if isinstance(obj, np.ndarray):
        if obj.dtype == object:
            return {"__list__": [_encode(v) for v in obj.tolist()]}
        arr = np.ascontiguousarray(obj)
        dt = arr.dtype.newbyteorder("<") if arr.dtype.byteorder not in ("|",) else arr.dtype
        return {
            "__ndarray__": {
                "dtype": dt.str,
                "shape": list(arr.shape),
                "data": base64.b64encode(arr.astype(dt).tobytes()).decode("ascii"),
            }
        }
    if isinstance(obj, dict):
        return {str(k): _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _decode(obj):
    if isinstance(obj, dict):
        if "__ndarray__" in obj:
            spec = obj["__ndarray__"]
            raw = base64.b64decode(spec["data"])
            return np.frombuffer(raw, dtype=np.dtype(spec["dtype"])).reshape(spec["shape"]).copy()
        if "__list__" in obj:
            return np.array([_decode(v) for v in obj["__list__"]], dtype=object)
        return {k: _decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode(v) for v in obj]
    return obj


def model_to_bytes(model: PipelineModel) -> bytes:
    doc = {
        "schema_version": model.schema_version,
        "labels": list(model.labels),
        "scaler": {"min": model.scaler.min, "max": model.scaler.max},
        "mask": {"keep": model.mask.keep, "threshold": model.mask.threshold, "variances": model.mask.variances},
        "pca": {
            "mean": model.pca.mean,
            "components": model.pca.components,
            "explained_variance_ratio": model.pca.explained_variance_ratio,
        },
        "classifier": model.classifier.get_state(),
    }
    payload = json.dumps(_encode(doc), sort_keys=True, separators=(",", ":")).encode("utf-8")
    return MAGIC + struct.pack("<Q", len(payload)) + payload + struct.pack("<I", zlib.crc32(payload))


def model_from_bytes(data: bytes) -> PipelineModel:
    if not data.startswith(MAGIC_PREFIX):
        raise IntegrityError("not a sesa-pipeline model file")
    newline = data.find(b"\n")
    if newline < 0:
        raise IntegrityError("model header is truncated")
    version = data[len(MAGIC_PREFIX) : newline].decode("ascii", "replace")
    if version != str(SCHEMA_VERSION):
        raise VersionError(f"model schema version {version!r} is not supported (expected {SCHEMA_VERSION})")
    off = newline + 1
    if len(data) < off + 8:
        raise IntegrityError("model file is truncated")
    (length,) = struct.unpack_from("<Q", data, off)
    off += 8
    if len(data) != off + length + 4:
        raise IntegrityError(f"model payload is {len(data) - off - 4} bytes, header says {length}")
    payload = data[off : off + length]
    (crc,) = struct.unpack_from("<I", data, off + length)
    if zlib.crc32(payload) != crc:
        raise IntegrityError("model checksum mismatch")
    doc = _decode(json.loads(payload.decode("utf-8")))
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise VersionError(f"payload schema version {doc.get('schema_version')!r} is not supported")
    m = doc["mask"]
    p = doc["pca"]
    return PipelineModel(
        scaler=ScalerParams(doc["scaler"]["min"], doc["scaler"]["max"]),
        mask=VarianceMask(m["keep"].astype(bool), float(m["threshold"]), m["variances"]),
        pca=PcaBasis(p["mean"], p["components"], p["explained_variance_ratio"]),
        classifier=TrainedModel.from_state(doc["classifier"]),
        labels=tuple(doc["labels"]),
        schema_version=doc["schema_version"],
    )


def save_model(model: PipelineModel, path: str | Path) -> Path:
    return atomic_write(path, model_to_bytes(model))


def load_model(path: str | Path) -> PipelineModel:
    return model_from_bytes(Path(path).read_bytes())
