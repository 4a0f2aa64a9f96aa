"""WAV decoding, sample-rate normalization and framing."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyAudioError, ParameterError, ParseError, UnsupportedFormatError

SAMPLE_RATE = 16000
FRAME_LEN = 3200  # 200 ms at 16 kHz
HOP = 1600  # 50% overlap

WAVE_FORMAT_PCM = 1


@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ParameterError(f"sample rate must be positive, got {self.sample_rate}")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class FrameSet:
    frames: np.ndarray  # (n_frames, frame_len)
    hop: int
    frame_len: int
    sample_rate: int

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]


def _iter_chunks(data: bytes, offset: int):
    while offset + 8 <= len(data):
        chunk_id, size = struct.unpack_from("<4sI", data, offset)
        body = data[offset + 8 : offset + 8 + size]
        yield chunk_id, body, size
        # chunks are word aligned
        offset += 8 + size + (size & 1)


def decode_wav(data: bytes) -> AudioClip:
    """Decode a PCM RIFF/WAVE byte string into a mono float clip.

    8-bit samples are unsigned and map to ``(s - 128) / 128``; 16-bit samples
    are signed and map to ``s / 32768``. Multi-channel audio is averaged.
    """
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise ParseError("not a RIFF/WAVE stream")

    fmt = None
    pcm = None
    for chunk_id, body, _size in _iter_chunks(data, 12):
        if chunk_id == b"fmt ":
            if len(body) < 16:
                raise ParseError("fmt chunk shorter than 16 bytes")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            if fmt is None:
                raise ParseError("data chunk precedes fmt chunk")
            # tolerate writers that leave a stale size field; use what is present
            pcm = body
            break

    if fmt is None:
        raise ParseError("missing fmt chunk")
    if pcm is None:
        raise ParseError("missing data chunk")

    format_code, channels, rate, _byte_rate, block_align, bits = fmt
    if format_code != WAVE_FORMAT_PCM:
        raise UnsupportedFormatError(f"format code {format_code} is not uncompressed PCM")
    if bits not in (8, 16):
        raise UnsupportedFormatError(f"{bits}-bit samples are not supported")
    if channels < 1:
        raise ParseError("channel count must be at least 1")
    if rate <= 0:
        raise ParseError("sample rate must be positive")
    width = bits // 8
    if block_align and block_align != channels * width:
        raise ParseError(f"block align {block_align} inconsistent with {channels}x{bits}-bit")

    n = len(pcm) // (width * channels)
    if n == 0:
        raise EmptyAudioError("data chunk holds no samples")
    pcm = pcm[: n * width * channels]

    if bits == 8:
        raw = np.frombuffer(pcm, dtype=np.uint8).astype(np.float64)
        x = (raw - 128.0) / 128.0
    else:
        raw = np.frombuffer(pcm, dtype="<i2").astype(np.float64)
        x = raw / 32768.0
    if channels > 1:
        x = x.reshape(n, channels).mean(axis=1)
    return AudioClip(samples=x, sample_rate=int(rate))


def encode_wav(samples: np.ndarray, sample_rate: int, bits: int = 8) -> bytes:
    """Encode mono float samples in [-1, 1) as PCM WAV bytes (u8 or i16)."""
    x = np.asarray(samples, dtype=np.float64)
    if bits == 8:
        q = np.clip(np.round(x * 128.0) + 128.0, 0, 255).astype(np.uint8)
        payload = q.tobytes()
    elif bits == 16:
        q = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")
        payload = q.tobytes()
    else:
        raise ParameterError(f"cannot encode {bits}-bit PCM")
    width = bits // 8
    fmt = struct.pack("<HHIIHH", WAVE_FORMAT_PCM, 1, sample_rate, sample_rate * width, width, bits)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(payload)) + payload
    if len(payload) & 1:
        body += b"\x00"
    return b"RIFF" + struct.pack("<I", len(body)) + body


def read_wav(path: str | Path) -> AudioClip:
    return decode_wav(Path(path).read_bytes())


def normalize_rate(clip: AudioClip, target: int = SAMPLE_RATE) -> AudioClip:
    """Resample by linear interpolation; identity when the rates already match."""
    if target <= 0:
        raise ParameterError(f"target rate must be positive, got {target}")
    if clip.sample_rate == target:
        return clip
    if len(clip.samples) < 2:
        return AudioClip(clip.samples, target)
    n_out = max(1, int(round(len(clip.samples) * target / clip.sample_rate)))
    positions = np.arange(n_out) * (clip.sample_rate / target)
    y = np.interp(positions, np.arange(len(clip.samples)), clip.samples)
    return AudioClip(samples=y, sample_rate=target)


def n_frames_for(length: int, frame_len: int = FRAME_LEN, hop: int = HOP) -> int:
    if length <= frame_len:
        return 1
    return 1 + (length - frame_len) // hop


def frame_signal(clip: AudioClip, frame_len: int = FRAME_LEN, hop: int = HOP) -> FrameSet:
    """Slice a clip into overlapping frames.

    The trailing partial frame is dropped. A clip shorter than one frame is
    zero-padded at the tail into exactly one frame.
    """
    if frame_len <= 0 or not 0 < hop <= frame_len:
        raise ParameterError(f"need frame_len > 0 and 0 < hop <= frame_len, got {frame_len}/{hop}")
    x = np.asarray(clip.samples, dtype=np.float64)
    if x.size == 0:
        raise EmptyAudioError("cannot frame an empty clip")
    if x.size < frame_len:
        x = np.concatenate([x, np.zeros(frame_len - x.size)])
    n = n_frames_for(x.size, frame_len, hop)
    idx = np.arange(frame_len)[None, :] + hop * np.arange(n)[:, None]
    return FrameSet(frames=x[idx], hop=hop, frame_len=frame_len, sample_rate=clip.sample_rate)


def load_clip(path: str | Path, target: int = SAMPLE_RATE) -> AudioClip:
    return normalize_rate(read_wav(path), target)
