"""Frame-level audio descriptors and the 149-column feature layout.

Every extractor works on a whole clip's frames at once: inputs are
``(n_frames, ...)`` arrays and outputs are ``(n_frames, width)``. Single
rows (1-D arrays) are accepted where that is natural.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from . import dsp
from .audio import FRAME_LEN, HOP, SAMPLE_RATE, AudioClip, frame_signal
from .errors import ExtractionError, ParameterError

DB_FLOOR = 1e-10
N_MELS = 20
N_MFCC = 20
DELTA_WIDTH = 9
CENS_WIN = 9
CENS_STEPS = (0.05, 0.1, 0.2, 0.4)
CONTRAST_EDGES = (0.0, 200.0, 400.0, 800.0, 1600.0, 3200.0, 6400.0, 8000.0)
CONTRAST_QUANTILE = 0.02
ROLLOFF_FRACTION = 0.85

LAYOUT: tuple[tuple[str, int], ...] = (
    ("chroma_cens", 12),
    ("chroma_cqt", 12),
    ("chroma_stft", 12),
    ("melspectrogram", 20),
    ("mfcc_slaney", 20),
    ("mfcc_htk", 20),
    ("mfcc_delta", 20),
    ("mfcc_delta_delta", 20),
    ("rms", 1),
    ("spectral_centroid", 1),
    ("spectral_bandwidth", 1),
    ("spectral_contrast", 7),
    ("spectral_flatness", 1),
    ("spectral_rolloff", 1),
    ("zcr", 1),
)


def _slices():
    out, start = {}, 0
    for name, width in LAYOUT:
        out[name] = slice(start, start + width)
        start += width
    return out, start


SLICES, N_FEATURES = _slices()
assert N_FEATURES == 149
COLUMN_NAMES = tuple(f"f{i:03d}" for i in range(1, N_FEATURES + 1))


# -- time domain --

def rms(frames: np.ndarray) -> np.ndarray:
    frames = np.asarray(frames, dtype=np.float64)
    return np.sqrt(np.mean(frames**2, axis=-1))


def zcr(frames: np.ndarray) -> np.ndarray:
    """Fraction of adjacent sample pairs whose sign differs; zero counts as non-negative."""
    nonneg = np.asarray(frames) >= 0
    changes = np.count_nonzero(nonneg[..., 1:] != nonneg[..., :-1], axis=-1)
    return changes / (nonneg.shape[-1] - 1)


# -- spectral shape --

def _safe_ratio(num, den):
    den = np.asarray(den, dtype=np.float64)
    return np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)


def spectral_centroid(mags: np.ndarray, bin_freqs: np.ndarray) -> np.ndarray:
    mags = np.asarray(mags, dtype=np.float64)
    return _safe_ratio(mags @ bin_freqs, mags.sum(axis=-1))


def spectral_bandwidth(mags: np.ndarray, bin_freqs: np.ndarray) -> np.ndarray:
    mags = np.asarray(mags, dtype=np.float64)
    total = mags.sum(axis=-1)
    centroid = spectral_centroid(mags, bin_freqs)
    dev = (bin_freqs - centroid[..., None]) ** 2
    return np.sqrt(_safe_ratio(np.sum(mags * dev, axis=-1), total))


def spectral_flatness(mags: np.ndarray) -> np.ndarray:
    power = np.maximum(np.asarray(mags, dtype=np.float64) ** 2, DB_FLOOR)
    gmean = np.exp(np.mean(np.log(power), axis=-1))
    return gmean / np.mean(power, axis=-1)


def spectral_rolloff(mags: np.ndarray, bin_freqs: np.ndarray, fraction: float = ROLLOFF_FRACTION) -> np.ndarray:
    if not 0 < fraction <= 1:
        raise ParameterError(f"rolloff fraction must lie in (0, 1], got {fraction}")
    power = np.asarray(mags, dtype=np.float64) ** 2
    cum = np.cumsum(power, axis=-1)
    total = cum[..., -1:]
    idx = np.argmax(cum >= fraction * total, axis=-1)
    return np.where(total[..., 0] > 0, bin_freqs[idx], 0.0)


def spectral_contrast(mags: np.ndarray, bin_freqs: np.ndarray) -> np.ndarray:
    """Peak-minus-valley level in dB for each of seven octave-ish sub-bands."""
    mags = np.atleast_2d(np.asarray(mags, dtype=np.float64))
    edges = CONTRAST_EDGES
    out = np.zeros((mags.shape[0], len(edges) - 1))
    for b in range(len(edges) - 1):
        lo, hi = edges[b], edges[b + 1]
        last = b == len(edges) - 2
        in_band = (bin_freqs >= lo) & ((bin_freqs <= hi) if last else (bin_freqs < hi))
        band = mags[:, in_band]
        n = band.shape[1]
        if n == 0:
            continue
        q = max(1, int(round(CONTRAST_QUANTILE * n)))
        srt = np.sort(band, axis=1)
        valley = np.mean(srt[:, :q], axis=1)
        peak = np.mean(srt[:, -q:], axis=1)
        out[:, b] = 20.0 * (np.log10(np.maximum(peak, DB_FLOOR)) - np.log10(np.maximum(valley, DB_FLOOR)))
    return out


# -- mel / cepstral --

@lru_cache(maxsize=8)
def _filterbank(scale: str, fft_len: int, sample_rate: int) -> np.ndarray:
    fb = dsp.mel_filterbank(N_MELS, 0.0, sample_rate / 2, scale, fft_len, sample_rate)
    w = fb.weights
    w.setflags(write=False)
    return w


def melspectrogram(power: np.ndarray, weights: np.ndarray | None = None) -> np.ndarray:
    """Slaney mel filterbank applied to a power spectrogram."""
    power = np.asarray(power, dtype=np.float64)
    if weights is None:
        weights = _filterbank("slaney", 2 * (power.shape[-1] - 1), SAMPLE_RATE)
    return power @ weights.T


def power_to_db(x: np.ndarray) -> np.ndarray:
    return 10.0 * np.log10(np.maximum(x, DB_FLOOR))


def mfcc(mags: np.ndarray, scale: str = "slaney", sample_rate: int = SAMPLE_RATE) -> np.ndarray:
    mags = np.asarray(mags, dtype=np.float64)
    weights = _filterbank(scale, 2 * (mags.shape[-1] - 1), sample_rate)
    mel = (mags**2) @ weights.T
    return dsp.dct2_ortho(power_to_db(mel), N_MFCC)


def delta(series: np.ndarray, order: int = 1, width: int = DELTA_WIDTH) -> np.ndarray:
    """Regression slope over ``width`` frames with edge frames replicated.

    ``series`` is (n_frames, n_coeffs); order 2 applies the first-order
    delta twice.
    """
    if order not in (1, 2):
        raise ParameterError(f"delta order must be 1 or 2, got {order}")
    series = np.asarray(series, dtype=np.float64)
    if series.shape[0] < 1:
        raise ParameterError("delta needs at least one frame")
    half = width // 2
    denom = 2.0 * sum(n * n for n in range(1, half + 1))
    out = series
    for _ in range(order):
        padded = np.pad(out, ((half, half), (0, 0)), mode="edge")
        t = out.shape[0]
        d = np.zeros_like(out)
        for n in range(1, half + 1):
            d += n * (padded[half + n : half + n + t] - padded[half - n : half - n + t])
        out = d / denom
    return out


# -- chroma --

def _max_normalize(x: np.ndarray) -> np.ndarray:
    peak = x.max(axis=-1, keepdims=True)
    return np.where(peak > 0, x / np.where(peak > 0, peak, 1.0), 0.0)


@lru_cache(maxsize=8)
def _pitch_classes(fft_len: int, sample_rate: int) -> np.ndarray:
    freqs = dsp.fft_frequencies(sample_rate, fft_len)
    pc = np.full(freqs.shape, -1, dtype=np.int64)
    midi = np.round(12.0 * np.log2(freqs[1:] / 440.0)).astype(np.int64) + 69
    pc[1:] = np.mod(midi, 12)
    pc.setflags(write=False)
    return pc


def chroma_stft(mags: np.ndarray, sample_rate: int = SAMPLE_RATE) -> np.ndarray:
    """Power per pitch class (C = 0, nearest-semitone assignment, A440), max-normalized."""
    mags = np.atleast_2d(np.asarray(mags, dtype=np.float64))
    pc = _pitch_classes(2 * (mags.shape[-1] - 1), sample_rate)
    onehot = (pc[:, None] == np.arange(12)[None, :]).astype(np.float64)
    return _max_normalize((mags**2) @ onehot)


def fold_octaves(cqt_mags: np.ndarray) -> np.ndarray:
    cqt_mags = np.atleast_2d(np.asarray(cqt_mags, dtype=np.float64))
    n = cqt_mags.shape[1]
    onehot = (np.arange(n)[:, None] % 12 == np.arange(12)[None, :]).astype(np.float64)
    return cqt_mags @ onehot


def chroma_cqt(cqt_mags: np.ndarray) -> np.ndarray:
    return _max_normalize(fold_octaves(cqt_mags))


def _cens_window(n: int) -> np.ndarray:
    # symmetric Hann with the zero end-points dropped, so all n taps weigh in
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(1, n + 1) / (n + 1))


def chroma_cens(chroma: np.ndarray, win: int = CENS_WIN) -> np.ndarray:
    chroma = np.atleast_2d(np.asarray(chroma, dtype=np.float64))
    l1 = chroma.sum(axis=1, keepdims=True)
    x = np.where(l1 > 0, chroma / np.where(l1 > 0, l1, 1.0), 0.0)
    q = np.zeros_like(x)
    for step in CENS_STEPS:
        q += 0.25 * (x > step)

    w = _cens_window(win)
    half = win // 2
    t = q.shape[0]
    num = np.zeros_like(q)
    wsum = np.zeros((t, 1))
    for i, wi in enumerate(w):
        shift = i - half
        lo, hi = max(0, -shift), min(t, t - shift)
        if lo >= hi:
            continue
        num[lo:hi] += wi * q[lo + shift : hi + shift]
        wsum[lo:hi] += wi
    smooth = num / wsum

    l2 = np.sqrt(np.sum(smooth**2, axis=1, keepdims=True))
    return np.where(l2 > 0, smooth / np.where(l2 > 0, l2, 1.0), 0.0)


# -- assembly --

def assemble(outputs: dict[str, np.ndarray]) -> np.ndarray:
    """Concatenate extractor outputs into (n_frames, 149) in layout order."""
    missing = [name for name, _ in LAYOUT if name not in outputs]
    if missing:
        raise ExtractionError(f"missing extractor outputs: {', '.join(missing)}")
    blocks = []
    n_frames = None
    for name, width in LAYOUT:
        block = np.asarray(outputs[name], dtype=np.float64)
        if block.ndim == 1:
            block = block[:, None]
        if block.shape[1] != width:
            raise ExtractionError(f"{name}: expected width {width}, got {block.shape[1]}")
        if n_frames is None:
            n_frames = block.shape[0]
        elif block.shape[0] != n_frames:
            raise ExtractionError(f"{name}: {block.shape[0]} frames, expected {n_frames}")
        bad = ~np.isfinite(block)
        if bad.any():
            frame = int(np.argwhere(bad)[0, 0])
            raise ExtractionError(f"non-finite value in {name} at frame {frame}")
        blocks.append(block)
    return np.hstack(blocks)


def extract_outputs(clip: AudioClip, frame_len: int = FRAME_LEN, hop: int = HOP) -> dict[str, np.ndarray]:
    frames = frame_signal(clip, frame_len, hop)
    spec = dsp.stft(frames)
    mags, freqs = spec.magnitudes, spec.bin_freqs
    power = mags**2
    chroma_cq = chroma_cqt(dsp.cqt(frames))
    mfcc_s = mfcc(mags, "slaney", clip.sample_rate)
    return {
        "chroma_cens": chroma_cens(chroma_cq),
        "chroma_cqt": chroma_cq,
        "chroma_stft": chroma_stft(mags, clip.sample_rate),
        "melspectrogram": melspectrogram(power, _filterbank("slaney", spec.fft_len, clip.sample_rate)),
        "mfcc_slaney": mfcc_s,
        "mfcc_htk": mfcc(mags, "htk", clip.sample_rate),
        "mfcc_delta": delta(mfcc_s, 1),
        "mfcc_delta_delta": delta(mfcc_s, 2),
        "rms": rms(frames.frames),
        "spectral_centroid": spectral_centroid(mags, freqs),
        "spectral_bandwidth": spectral_bandwidth(mags, freqs),
        "spectral_contrast": spectral_contrast(mags, freqs),
        "spectral_flatness": spectral_flatness(mags),
        "spectral_rolloff": spectral_rolloff(mags, freqs),
        "zcr": zcr(frames.frames),
    }


def extract(clip: AudioClip, frame_len: int = FRAME_LEN, hop: int = HOP) -> np.ndarray:
    """Full feature matrix for one clip, shape (n_frames, 149)."""
    return assemble(extract_outputs(clip, frame_len, hop))
