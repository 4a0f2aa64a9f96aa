"""Seeded synthetic corpus with the four surveillance classes.

Each class has a distinct signature so that frame-level classifiers can
separate them:

* gunshot: dense exponentially-decaying broadband bursts
* explosion: low-passed noise with long decays, re-triggered
* siren: tone whose frequency is swept sinusoidally at 2.2-3 Hz
* casual: steady tone mixtures over stationary noise
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping

import numpy as np

from .audio import SAMPLE_RATE, encode_wav
from .dataset import CLASSES, DatasetManifest, Entry, MANIFEST_NAME, manifest_csv
from .errors import ParameterError
from .ioutil import atomic_write

SR = SAMPLE_RATE


def _noise_floor(rng, n):
    return 0.004 * rng.standard_normal(n)


def _lowpass(x, cutoff):
    # one-pole IIR, applied twice for a steeper skirt
    a = np.exp(-2.0 * np.pi * cutoff / SR)
    for _ in range(2):
        y = np.empty_like(x)
        acc = 0.0
        for i, v in enumerate(x):
            acc = (1.0 - a) * v + a * acc
            y[i] = acc
        x = y
    return x


def gunshot(rng: np.random.Generator, duration: float) -> np.ndarray:
    n = int(duration * SR)
    x = _noise_floor(rng, n)
    t = rng.uniform(0.0, 0.05)
    while t < duration:
        start = int(t * SR)
        tau = rng.uniform(0.010, 0.030)
        length = min(n - start, int(6 * tau * SR))
        env = np.exp(-np.arange(length) / (tau * SR))
        x[start : start + length] += rng.uniform(0.5, 0.9) * env * rng.standard_normal(length)
        t += rng.uniform(0.08, 0.15)
    return x


def explosion(rng: np.random.Generator, duration: float) -> np.ndarray:
    n = int(duration * SR)
    raw = rng.standard_normal(n)
    rumble = _lowpass(raw, rng.uniform(150.0, 400.0))
    rumble /= np.max(np.abs(rumble)) + 1e-12
    env = np.zeros(n)
    t = 0.0
    while t < duration:
        start = int(t * SR)
        tau = rng.uniform(0.8, 2.0)
        env[start:] = np.maximum(env[start:], np.exp(-np.arange(n - start) / (tau * SR)))
        t += rng.uniform(0.7, 1.2)
    return 0.8 * env * rumble + _noise_floor(rng, n)


def siren(rng: np.random.Generator, duration: float) -> np.ndarray:
    n = int(duration * SR)
    t = np.arange(n) / SR
    center = rng.uniform(700.0, 1100.0)
    dev = rng.uniform(200.0, 400.0)
    rate = rng.uniform(2.2, 3.0)
    phase0 = rng.uniform(0.0, 2.0 * np.pi)
    inst = center + dev * np.sin(2.0 * np.pi * rate * t + phase0)
    phase = 2.0 * np.pi * np.cumsum(inst) / SR
    x = 0.45 * np.sin(phase) + 0.12 * np.sin(2.0 * phase)
    return x + _noise_floor(rng, n)


def casual(rng: np.random.Generator, duration: float) -> np.ndarray:
    n = int(duration * SR)
    t = np.arange(n) / SR
    x = rng.uniform(0.03, 0.08) * rng.standard_normal(n)
    for _ in range(rng.integers(2, 5)):
        f = rng.uniform(150.0, 3000.0)
        x += rng.uniform(0.05, 0.2) * np.sin(2.0 * np.pi * f * t + rng.uniform(0.0, 2.0 * np.pi))
    if rng.random() < 0.5:
        x *= 1.0 + 0.3 * np.sin(2.0 * np.pi * rng.uniform(0.2, 0.8) * t)
    return x


GENERATORS = {"casual": casual, "explosion": explosion, "gunshot": gunshot, "siren": siren}
DURATION_RANGE = {"casual": (1.0, 4.0), "explosion": (1.0, 4.0), "gunshot": (1.0, 4.0), "siren": (2.0, 4.0)}


def _normalize_counts(counts: Mapping[str, int | tuple[int, int]]) -> dict[str, tuple[int, int]]:
    out = {}
    for label, c in counts.items():
        if label not in CLASSES:
            raise ParameterError(f"unknown class {label!r}")
        train, test = (c, 0) if isinstance(c, int) else (int(c[0]), int(c[1]))
        if train + test < 1 or train < 0 or test < 0:
            raise ParameterError(f"{label}: need at least one file, got {c!r}")
        out[label] = (train, test)
    return out


def synth_clip(seed: int, label: str, split: str, index: int) -> np.ndarray:
    rng = np.random.default_rng([seed, CLASSES.index(label), ("train", "test").index(split), index])
    lo, hi = DURATION_RANGE[label]
    x = GENERATORS[label](rng, rng.uniform(lo, hi))
    return np.clip(x, -0.99, 0.99)


def synth_corpus(
    dest: str | Path,
    seed: int = 0,
    counts: Mapping[str, int | tuple[int, int]] | None = None,
) -> DatasetManifest:
    """Write 16 kHz 8-bit mono WAVs under ``dest/{train,test}/<label>/`` plus manifest.csv.

    ``counts`` maps a class to a train count or a (train, test) pair; the
    default is 40 files per class split 30/10.
    """
    dest = Path(dest)
    plan = _normalize_counts(counts if counts is not None else {c: (30, 10) for c in CLASSES})
    entries = []
    for label, (n_train, n_test) in plan.items():
        for split, n in (("train", n_train), ("test", n_test)):
            for i in range(n):
                rel = f"{split}/{label}/{label}_{i:03d}.wav"
                x = synth_clip(seed, label, split, i)
                atomic_write(dest / rel, encode_wav(x, SR, bits=8))
                entries.append(Entry(rel, split, label))
    for split in ("train", "test"):
        (dest / split).mkdir(parents=True, exist_ok=True)
    entries.sort(key=lambda e: (e.split, e.path))
    atomic_write(dest / MANIFEST_NAME, manifest_csv(entries))
    return DatasetManifest(root=dest, entries=entries)
