"""Checksummed download and extraction of a dataset archive."""

from __future__ import annotations

import hashlib
import logging
import shutil
import tarfile
import time
import urllib.error
import urllib.request
import zipfile
from pathlib import Path

from .dataset import DatasetManifest, load_manifest
from .errors import FetchError, IntegrityError, LayoutError, ParameterError

log = logging.getLogger(__name__)

MARKER = ".fetch-complete"
ATTEMPTS = 3
BACKOFF_S = 1.0


def _download(url: str, dest: Path, opener, attempts: int, backoff: float) -> str:
    last = None
    for attempt in range(attempts):
        try:
            h = hashlib.sha256()
            with opener(url, timeout=60) as resp, open(dest, "wb") as fh:
                while True:
                    block = resp.read(1 << 20)
                    if not block:
                        break
                    h.update(block)
                    fh.write(block)
            return h.hexdigest()
        except (urllib.error.URLError, OSError, TimeoutError) as exc:
            last = exc
            dest.unlink(missing_ok=True)
            if attempt + 1 < attempts:
                wait = backoff * 2**attempt
                log.warning("download attempt %d failed (%s); retrying in %.1fs", attempt + 1, exc, wait)
                time.sleep(wait)
    raise FetchError(f"download of {url} failed after {attempts} attempts: {last}")


def _safe_extract(archive: Path, into: Path) -> None:
    into_resolved = into.resolve()

    def check(name: str):
        target = (into / name).resolve()
        if into_resolved not in target.parents and target != into_resolved:
            raise IntegrityError(f"archive member {name!r} escapes the destination")

    if zipfile.is_zipfile(archive):
        with zipfile.ZipFile(archive) as zf:
            for name in zf.namelist():
                check(name)
            zf.extractall(into)
    elif tarfile.is_tarfile(archive):
        with tarfile.open(archive) as tf:
            for member in tf.getmembers():
                check(member.name)
                if member.issym() or member.islnk():
                    raise IntegrityError(f"archive member {member.name!r} is a link")
            tf.extractall(into)
    else:
        raise IntegrityError(f"{archive.name} is neither a zip nor a tar archive")


def _find_root(base: Path) -> Path:
    candidates = [base] + sorted(p for p in base.rglob("*") if p.is_dir())
    for c in candidates:
        if (c / "train").is_dir() and (c / "test").is_dir():
            return c
    raise LayoutError(f"no directory with train/ and test/ found under {base}")


def fetch_dataset(
    url: str,
    dest: str | Path,
    checksum: str,
    opener=urllib.request.urlopen,
    attempts: int = ATTEMPTS,
    backoff: float = BACKOFF_S,
) -> DatasetManifest:
    """Download ``url`` into ``dest``, verify its SHA-256, extract it and load the manifest.

    A completed fetch leaves a marker recording the checksum; re-running with
    the same checksum skips the download.
    """
    if not url:
        raise ParameterError("no dataset URL configured")
    checksum = (checksum or "").strip().lower()
    if len(checksum) != 64:
        raise ParameterError("a 64-hex-digit SHA-256 checksum is required")
    dest = Path(dest)
    marker = dest / MARKER
    if marker.is_file():
        recorded, _, rel = marker.read_text().strip().partition(" ")
        if recorded == checksum:
            log.info("dataset already present in %s", dest)
            return load_manifest(dest / rel if rel else dest)

    dest.mkdir(parents=True, exist_ok=True)
    part = dest / ".download.part"
    staging = dest / ".extract"
    try:
        digest = _download(url, part, opener, attempts, backoff)
        if digest != checksum:
            raise IntegrityError(f"SHA-256 mismatch: expected {checksum}, got {digest}")
        shutil.rmtree(staging, ignore_errors=True)
        staging.mkdir()
        _safe_extract(part, staging)
        for child in staging.iterdir():
            target = dest / child.name
            if target.exists():
                shutil.rmtree(target) if target.is_dir() else target.unlink()
            child.rename(target)
        root = _find_root(dest)
        manifest = load_manifest(root)
    finally:
        part.unlink(missing_ok=True)
        shutil.rmtree(staging, ignore_errors=True)
    rel = root.relative_to(dest).as_posix()
    marker.write_text(f"{checksum} {'' if rel == '.' else rel}\n")
    return manifest
