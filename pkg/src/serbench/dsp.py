"""Numerical kernels shared by the feature extractors.

STFT magnitudes, mel filterbanks on the Slaney and HTK scales, the
orthonormal DCT-II and a direct time-domain constant-Q transform.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .audio import FRAME_LEN, SAMPLE_RATE, FrameSet
from .errors import ParameterError

FFT_LEN = 4096  # next power of two >= FRAME_LEN

CQT_FMIN = 32.703  # C1
CQT_BINS_PER_OCTAVE = 12
CQT_N_BINS = 84


@dataclass(frozen=True)
class Spectrogram:
    magnitudes: np.ndarray  # (n_frames, fft_len // 2 + 1)
    bin_freqs: np.ndarray
    fft_len: int


@dataclass(frozen=True)
class MelFilterbank:
    weights: np.ndarray  # (n_mels, n_freqs)
    scale: str
    fmin: float
    fmax: float
    hz_points: np.ndarray  # n_mels + 2 break frequencies


@dataclass(frozen=True)
class CqtKernelSet:
    freqs: np.ndarray
    lengths: np.ndarray  # N_k before truncation
    q: float
    kernels: np.ndarray  # (n_bins, frame_len) complex, centered in the frame


def hann(n: int) -> np.ndarray:
    """Periodic Hann window."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def fft_frequencies(sample_rate: int = SAMPLE_RATE, fft_len: int = FFT_LEN) -> np.ndarray:
    return np.arange(fft_len // 2 + 1) * (sample_rate / fft_len)


def stft(frames: FrameSet, fft_len: int = FFT_LEN, window: str = "hann") -> Spectrogram:
    """Magnitude spectrum of each frame, windowed and zero-padded to ``fft_len``.

    ``window="rect"`` skips windowing; it exists for tests only.
    """
    if fft_len < frames.frame_len:
        raise ParameterError(f"fft_len {fft_len} shorter than frame_len {frames.frame_len}")
    if window == "hann":
        x = frames.frames * hann(frames.frame_len)
    elif window == "rect":
        x = frames.frames
    else:
        raise ParameterError(f"unknown window {window!r}")
    mags = np.abs(np.fft.rfft(x, n=fft_len, axis=1))
    return Spectrogram(mags, fft_frequencies(frames.sample_rate, fft_len), fft_len)


# -- mel scales --

_SLANEY_F_SP = 200.0 / 3
_SLANEY_MIN_LOG_HZ = 1000.0
_SLANEY_MIN_LOG_MEL = _SLANEY_MIN_LOG_HZ / _SLANEY_F_SP  # 15
_SLANEY_LOGSTEP = np.log(6.4) / 27.0


def hz_to_mel(f, scale: str = "slaney"):
    f = np.asarray(f, dtype=np.float64)
    if np.any(f < 0):
        raise ParameterError("frequency must be non-negative")
    if scale == "htk":
        mel = 2595.0 * np.log10(1.0 + f / 700.0)
    elif scale == "slaney":
        lin = f / _SLANEY_F_SP
        with np.errstate(divide="ignore"):
            log = _SLANEY_MIN_LOG_MEL + np.log(np.maximum(f, 1e-300) / _SLANEY_MIN_LOG_HZ) / _SLANEY_LOGSTEP
        mel = np.where(f >= _SLANEY_MIN_LOG_HZ, log, lin)
    else:
        raise ParameterError(f"unknown mel scale {scale!r}")
    return mel if mel.ndim else float(mel)


def mel_to_hz(m, scale: str = "slaney"):
    m = np.asarray(m, dtype=np.float64)
    if np.any(m < 0):
        raise ParameterError("mel value must be non-negative")
    if scale == "htk":
        f = 700.0 * (10.0 ** (m / 2595.0) - 1.0)
    elif scale == "slaney":
        lin = _SLANEY_F_SP * m
        log = _SLANEY_MIN_LOG_HZ * np.exp(_SLANEY_LOGSTEP * (m - _SLANEY_MIN_LOG_MEL))
        f = np.where(m >= _SLANEY_MIN_LOG_MEL, log, lin)
    else:
        raise ParameterError(f"unknown mel scale {scale!r}")
    return f if f.ndim else float(f)


def mel_filterbank(
    n_mels: int = 20,
    fmin: float = 0.0,
    fmax: float = SAMPLE_RATE / 2,
    scale: str = "slaney",
    fft_len: int = FFT_LEN,
    sample_rate: int = SAMPLE_RATE,
    freqs: np.ndarray | None = None,
) -> MelFilterbank:
    """Triangular filters with break points equally spaced on the mel scale.

    Slaney filters are area-normalized (each scaled by ``2 / (f_hi - f_lo)``);
    HTK filters keep unit height at their center frequency. ``freqs`` evaluates
    the filters on an arbitrary frequency grid instead of the FFT bins.
    """
    if n_mels < 1:
        raise ParameterError("n_mels must be at least 1")
    if not 0 <= fmin < fmax <= sample_rate / 2:
        raise ParameterError(f"need 0 <= fmin < fmax <= Nyquist, got {fmin}..{fmax}")
    if freqs is None:
        freqs = fft_frequencies(sample_rate, fft_len)
    freqs = np.asarray(freqs, dtype=np.float64)

    mels = np.linspace(hz_to_mel(fmin, scale), hz_to_mel(fmax, scale), n_mels + 2)
    hz = mel_to_hz(mels, scale)
    lo, center, hi = hz[:-2, None], hz[1:-1, None], hz[2:, None]
    rising = (freqs[None, :] - lo) / (center - lo)
    falling = (hi - freqs[None, :]) / (hi - center)
    weights = np.maximum(0.0, np.minimum(rising, falling))
    if scale == "slaney":
        weights *= 2.0 / (hz[2:] - hz[:-2])[:, None]
    return MelFilterbank(weights, scale, float(fmin), float(fmax), hz)


# -- cepstral transform --

@lru_cache(maxsize=16)
def dct_matrix(n: int, n_out: int | None = None) -> np.ndarray:
    """Orthonormal DCT-II basis, shape (n_out, n)."""
    n_out = n if n_out is None else n_out
    if not 1 <= n_out <= n:
        raise ParameterError(f"need 1 <= n_out <= n, got n={n}, n_out={n_out}")
    k = np.arange(n_out)[:, None]
    j = np.arange(n)[None, :]
    basis = np.cos(np.pi * k * (2 * j + 1) / (2 * n))
    basis[0] *= np.sqrt(1.0 / n)
    basis[1:] *= np.sqrt(2.0 / n)
    basis.setflags(write=False)
    return basis


def dct2_ortho(v: np.ndarray, n_out: int | None = None) -> np.ndarray:
    """Orthonormal DCT-II along the last axis, keeping the first ``n_out`` coefficients."""
    v = np.asarray(v, dtype=np.float64)
    return v @ dct_matrix(v.shape[-1], n_out).T


# -- constant-Q --

@lru_cache(maxsize=8)
def cqt_kernels(
    sample_rate: int = SAMPLE_RATE,
    frame_len: int = FRAME_LEN,
    fmin: float = CQT_FMIN,
    bins_per_octave: int = CQT_BINS_PER_OCTAVE,
    n_bins: int = CQT_N_BINS,
) -> CqtKernelSet:
    """Hann-windowed complex exponentials, one per constant-Q bin, centered in the frame.

    Kernels longer than the frame keep their central ``frame_len`` samples.
    Each kernel is divided by the sum of its retained window weights, which
    is ``N_k / 2`` when nothing is truncated.
    """
    k = np.arange(n_bins)
    freqs = fmin * 2.0 ** (k / bins_per_octave)
    if freqs[-1] >= sample_rate / 2:
        raise ParameterError(f"top CQT bin {freqs[-1]:.1f} Hz is at or above Nyquist")
    q = 1.0 / (2.0 ** (1.0 / bins_per_octave) - 1.0)
    lengths = np.ceil(q * sample_rate / freqs).astype(np.int64)

    kernels = np.zeros((n_bins, frame_len), dtype=np.complex128)
    for b in range(n_bins):
        n_k = int(lengths[b])
        t = np.arange(n_k) - n_k // 2
        atom = hann(n_k) * np.exp(2j * np.pi * freqs[b] * t / sample_rate)
        if n_k > frame_len:
            start = (n_k - frame_len) // 2
            atom = atom[start : start + frame_len]
            weight = hann(n_k)[start : start + frame_len].sum()
            kernels[b] = atom / weight
        else:
            # t = 0 of every kernel sits at frame index frame_len // 2
            start = frame_len // 2 - n_k // 2
            kernels[b, start : start + n_k] = atom / hann(n_k).sum()
    kernels.setflags(write=False)
    return CqtKernelSet(freqs=freqs, lengths=lengths, q=q, kernels=kernels)


def cqt(
    frames: FrameSet,
    fmin: float = CQT_FMIN,
    bins_per_octave: int = CQT_BINS_PER_OCTAVE,
    n_bins: int = CQT_N_BINS,
) -> np.ndarray:
    """Constant-Q magnitudes, shape (n_frames, n_bins)."""
    ks = cqt_kernels(frames.sample_rate, frames.frame_len, fmin, bins_per_octave, n_bins)
    return np.abs(frames.frames @ ks.kernels.conj().T)
