"""Annotated feature matrices, dataset-wide extraction and dump files."""

from __future__ import annotations

import csv
import io
import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import FRAME_LEN, HOP, load_clip
from .dataset import DatasetManifest
from .errors import ExtractionError, ParseError, SerBenchError
from .features import COLUMN_NAMES, N_FEATURES, extract
from .ioutil import atomic_write

log = logging.getLogger(__name__)

BIN_MAGIC = b"SESAF1"
CSV_HEADER = ("file_id", "split", "label", "frame") + COLUMN_NAMES
MAX_FAILURE_RATE = 0.10


@dataclass
class FeatureMatrix:
    X: np.ndarray  # (n_rows, 149)
    file_ids: np.ndarray
    splits: np.ndarray
    labels: np.ndarray
    frames: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.file_ids = np.asarray(self.file_ids, dtype=object)
        self.splits = np.asarray(self.splits, dtype=object)
        self.labels = np.asarray(self.labels, dtype=object)
        self.frames = np.asarray(self.frames, dtype=np.int64)
        n = self.X.shape[0]
        if any(len(a) != n for a in (self.file_ids, self.splits, self.labels, self.frames)):
            raise ValueError("annotation lengths must match the number of rows")

    def __len__(self):
        return self.X.shape[0]

    def subset(self, mask) -> "FeatureMatrix":
        return FeatureMatrix(self.X[mask], self.file_ids[mask], self.splits[mask], self.labels[mask], self.frames[mask])

    def split(self, name: str) -> "FeatureMatrix":
        return self.subset(self.splits == name)

    @classmethod
    def concat(cls, parts: list["FeatureMatrix"]) -> "FeatureMatrix":
        if not parts:
            return cls(np.zeros((0, N_FEATURES)), [], [], [], [])
        return cls(
            np.vstack([p.X for p in parts]),
            np.concatenate([p.file_ids for p in parts]),
            np.concatenate([p.splits for p in parts]),
            np.concatenate([p.labels for p in parts]),
            np.concatenate([p.frames for p in parts]),
        )

    def frame_counts(self) -> dict[str, int]:
        labels, counts = np.unique(self.labels.astype(str), return_counts=True)
        return dict(zip(labels.tolist(), counts.tolist()))


def extract_manifest(
    manifest: DatasetManifest,
    frame_len: int = FRAME_LEN,
    hop: int = HOP,
    max_failure_rate: float = MAX_FAILURE_RATE,
) -> tuple[FeatureMatrix, list[tuple[str, str]]]:
    """Extract every manifest entry; returns the matrix and (path, reason) failures.

    Individual decode failures are collected and skipped. More than
    ``max_failure_rate`` of files failing aborts with ExtractionError.
    """
    parts, failures = [], []
    for entry in manifest.entries:
        try:
            X = extract(load_clip(manifest.abspath(entry)), frame_len, hop)
        except (SerBenchError, OSError) as exc:
            log.warning("skipping %s: %s", entry.path, exc)
            failures.append((entry.path, str(exc)))
            continue
        n = X.shape[0]
        parts.append(FeatureMatrix(X, [entry.source_id] * n, [entry.split] * n, [entry.label] * n, np.arange(n)))
    if manifest.entries and len(failures) / len(manifest.entries) > max_failure_rate:
        listing = "; ".join(f"{p}: {r}" for p, r in failures[:10])
        raise ExtractionError(f"{len(failures)}/{len(manifest.entries)} files failed ({listing})")
    return FeatureMatrix.concat(parts), failures


# -- dump formats --

def to_csv(fm: FeatureMatrix) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for i in range(len(fm)):
        values = [format(v, ".17g") for v in fm.X[i]]
        writer.writerow([fm.file_ids[i], fm.splits[i], fm.labels[i], int(fm.frames[i])] + values)
    return buf.getvalue()


def from_csv(text: str) -> FeatureMatrix:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != CSV_HEADER:
        raise ParseError("feature CSV header does not match the 149-column layout")
    ids, splits, labels, frames, rows = [], [], [], [], []
    for row in reader:
        if not row:
            continue
        ids.append(row[0])
        splits.append(row[1])
        labels.append(row[2])
        frames.append(int(row[3]))
        rows.append([float(v) for v in row[4:]])
    X = np.array(rows, dtype=np.float64).reshape(len(rows), N_FEATURES)
    return FeatureMatrix(X, ids, splits, labels, frames)


def to_binary(fm: FeatureMatrix) -> bytes:
    meta = json.dumps(
        {
            "file_ids": fm.file_ids.tolist(),
            "splits": fm.splits.tolist(),
            "labels": fm.labels.tolist(),
            "frames": fm.frames.tolist(),
        },
        separators=(",", ":"),
    ).encode("utf-8")
    head = BIN_MAGIC + struct.pack("<III", len(fm), fm.X.shape[1], len(meta))
    return head + meta + fm.X.astype("<f8").tobytes()


def from_binary(data: bytes) -> FeatureMatrix:
    if data[: len(BIN_MAGIC)] != BIN_MAGIC:
        raise ParseError("missing SESAF1 magic")
    off = len(BIN_MAGIC)
    n_rows, n_cols, meta_len = struct.unpack_from("<III", data, off)
    off += 12
    if n_cols != N_FEATURES:
        raise ParseError(f"binary dump has {n_cols} columns, expected {N_FEATURES}")
    meta = json.loads(data[off : off + meta_len].decode("utf-8"))
    off += meta_len
    expected = n_rows * n_cols * 8
    if len(data) - off != expected:
        raise ParseError(f"binary dump body is {len(data) - off} bytes, expected {expected}")
    X = np.frombuffer(data, dtype="<f8", offset=off).reshape(n_rows, n_cols).astype(np.float64)
    return FeatureMatrix(X, meta["file_ids"], meta["splits"], meta["labels"], meta["frames"])


def save_features(fm: FeatureMatrix, path: str | Path, fmt: str | None = None) -> Path:
    path = Path(path)
    fmt = fmt or ("csv" if path.suffix.lower() == ".csv" else "bin")
    data = to_csv(fm) if fmt == "csv" else to_binary(fm)
    return atomic_write(path, data)


def load_features(path: str | Path) -> FeatureMatrix:
    data = Path(path).read_bytes()
    if data.startswith(BIN_MAGIC):
        return from_binary(data)
    return from_csv(data.decode("utf-8"))
