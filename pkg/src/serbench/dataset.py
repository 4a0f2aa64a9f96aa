"""Labeled dataset discovery: train/test folders and an optional manifest CSV."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

from .errors import LabelError, LayoutError

CLASSES = ("casual", "explosion", "gunshot", "siren")
SPLITS = ("train", "test")
MANIFEST_NAME = "manifest.csv"
MANIFEST_HEADER = ("path", "split", "label")


@dataclass(frozen=True)
class Entry:
    path: str  # relative to the dataset root, forward slashes
    split: str
    label: str

    @property
    def source_id(self) -> str:
        return self.path.rsplit(".", 1)[0]


@dataclass
class DatasetManifest:
    root: Path
    entries: list[Entry] = field(default_factory=list)

    def split(self, name: str) -> list[Entry]:
        return [e for e in self.entries if e.split == name]

    def abspath(self, entry: Entry) -> Path:
        return self.root / entry.path

    def counts(self) -> dict[tuple[str, str], int]:
        out: dict[tuple[str, str], int] = {}
        for e in self.entries:
            out[(e.split, e.label)] = out.get((e.split, e.label), 0) + 1
        return out


def _read_csv(path: Path) -> dict[str, tuple[str, str]]:
    rows: dict[str, tuple[str, str]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != MANIFEST_HEADER:
            raise LayoutError(f"{path}: expected header {','.join(MANIFEST_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise LayoutError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            rel, split, label = (c.strip() for c in row)
            rel = rel.replace("\\", "/")
            if label not in CLASSES:
                raise LabelError(f"{rel}: unknown label {label!r} (expected one of {', '.join(CLASSES)})")
            if split not in SPLITS:
                raise LayoutError(f"{rel}: unknown split {split!r}")
            rows[rel] = (split, label)
    return rows


def load_manifest(root: str | Path) -> DatasetManifest:
    """Collect (path, split, label) entries under ``root``.

    A file's split comes from the ``train``/``test`` subtree it lives in; its
    label from the immediate parent directory when that names a class,
    otherwise from ``manifest.csv`` at the root. Where both sources speak they
    must agree.
    """
    root = Path(root)
    csv_path = root / MANIFEST_NAME
    table = _read_csv(csv_path) if csv_path.is_file() else {}
    has_tree = all((root / s).is_dir() for s in SPLITS)
    if not has_tree and not table:
        raise LayoutError(f"{root}: needs train/ and test/ folders or a {MANIFEST_NAME}")

    found: dict[str, Entry] = {}
    if has_tree:
        for split in SPLITS:
            for wav in sorted((root / split).rglob("*")):
                if not wav.is_file() or wav.suffix.lower() != ".wav":
                    continue
                rel = wav.relative_to(root).as_posix()
                parent = wav.parent.name
                label = parent if parent in CLASSES else None
                if rel in table:
                    csv_split, csv_label = table[rel]
                    if csv_split != split:
                        raise LayoutError(f"{rel}: lives under {split}/ but CSV says {csv_split}")
                    if label is not None and csv_label != label:
                        raise LabelError(f"{rel}: directory says {label}, CSV says {csv_label}")
                    label = csv_label
                if label is None:
                    raise LabelError(f"{rel}: cannot infer label from directory {parent!r} and no CSV row")
                found[rel] = Entry(rel, split, label)

    for rel, (split, label) in table.items():
        if rel in found:
            continue
        if not (root / rel).is_file():
            raise LayoutError(f"{rel}: listed in {MANIFEST_NAME} but missing on disk")
        found[rel] = Entry(rel, split, label)

    entries = sorted(found.values(), key=lambda e: (e.split, e.path))
    return DatasetManifest(root=root, entries=entries)


def manifest_csv(entries: list[Entry]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(MANIFEST_HEADER)
    for e in entries:
        writer.writerow((e.path, e.split, e.label))
    return buf.getvalue()
