"""Log-mel spectrogram features and the embedding interchange format.

The built-in embedder pools log-mel statistics per clip. It is a
dependency-free stand-in, not a neural network; externally computed neural
embeddings travel through the AEB1 file format and feed the same distance
computation bit-for-bit.

AEB1 layout: bytes 0-3 ASCII magic "AEB1", bytes 4-7 u32 LE vector
dimension, bytes 8-11 u32 LE vector count, then count*dim IEEE-754 float32
LE values, row-major.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .audio_io import AudioClip
from .errors import ScenevalError

AEB1_MAGIC = b"AEB1"
_HEADER = struct.Struct("<4sII")


class InvalidConfig(ScenevalError):
    pass


class ClipTooShort(ScenevalError):
    pass


class NotMono(ScenevalError):
    pass


class BadMagic(ScenevalError):
    pass


class DimensionMismatch(ScenevalError):
    pass


class TruncatedFile(ScenevalError):
    pass


@dataclass(frozen=True)
class SpectrogramConfig:
    """Front-end parameters; the analysis window is always Hann (periodic).

    Defaults mirror a 32 kHz log-mel front end commonly used by audio
    tagging networks: 1024-point FFT, 320-sample hop, 64 mel bands between
    50 Hz and 14 kHz.
    """

    n_fft: int = 1024
    hop: int = 320
    n_mels: int = 64
    f_min: float = 50.0
    f_max: float = 14000.0
    log_floor: float = 1e-10


@dataclass(frozen=True)
class MelFilterbank:
    """Triangular mel filters: weights has shape (n_mels, n_fft // 2 + 1)."""

    weights: np.ndarray
    sample_rate: int
    config: SpectrogramConfig


@dataclass(frozen=True)
class EmbeddingSet:
    """A batch of fixed-dimension feature vectors for one audio collection.

    Vectors are stored float32, matching the interchange format, so a
    write/read round trip is bit-exact against the in-memory set.
    """

    vectors: np.ndarray
    label: str = ""

    def __post_init__(self):
        arr = np.asarray(self.vectors)
        if arr.ndim != 2:
            raise DimensionMismatch(
                f"embedding set needs a 2-D (count, dim) array, got shape {arr.shape}"
            )
        object.__setattr__(self, "vectors", np.ascontiguousarray(arr, dtype=np.float32))

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    @classmethod
    def from_vectors(cls, vectors: Sequence[np.ndarray], label: str = "") -> "EmbeddingSet":
        lengths = {len(v) for v in vectors}
        if len(lengths) > 1:
            raise DimensionMismatch(f"mixed vector dimensions {sorted(lengths)}")
        return cls(vectors=np.asarray(vectors, dtype=np.float32), label=label)


def hz_to_mel(f: float | np.ndarray) -> float | np.ndarray:
    """HTK mel scale: mel(f) = 2595 * log10(1 + f / 700)."""
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m: float | np.ndarray) -> float | np.ndarray:
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(config: SpectrogramConfig, sample_rate: int) -> MelFilterbank:
    """Build triangular filters with centres equally spaced in HTK mel.

    Raises InvalidConfig when the parameters are out of range or when some
    filter would cover no FFT bin at all.
    """
    _check_config(config, sample_rate)
    n_bins = config.n_fft // 2 + 1
    fft_freqs = np.arange(n_bins, dtype=np.float64) * (sample_rate / config.n_fft)
    mel_points = np.linspace(
        hz_to_mel(config.f_min), hz_to_mel(config.f_max), config.n_mels + 2
    )
    hz_points = mel_to_hz(mel_points)

    weights = np.zeros((config.n_mels, n_bins), dtype=np.float64)
    for m in range(config.n_mels):
        lo, centre, hi = hz_points[m], hz_points[m + 1], hz_points[m + 2]
        rising = (fft_freqs - lo) / (centre - lo)
        falling = (hi - fft_freqs) / (hi - centre)
        weights[m] = np.maximum(0.0, np.minimum(rising, falling))

    if not (weights.max(axis=1) > 0).all():
        raise InvalidConfig(
            "some mel filter covers no FFT bin; decrease n_mels or widen the band"
        )
    return MelFilterbank(weights=weights, sample_rate=sample_rate, config=config)


def _check_config(config: SpectrogramConfig, sample_rate: int) -> None:
    if config.n_fft < 2:
        raise InvalidConfig(f"n_fft must be >= 2, got {config.n_fft}")
    if not (0 < config.hop <= config.n_fft):
        raise InvalidConfig(f"hop must be in (0, n_fft], got {config.hop}")
    if config.n_mels < 1:
        raise InvalidConfig(f"n_mels must be >= 1, got {config.n_mels}")
    if not (0 < config.f_min < config.f_max <= sample_rate / 2):
        raise InvalidConfig(
            f"need 0 < f_min < f_max <= sample_rate/2, got "
            f"f_min={config.f_min}, f_max={config.f_max}, sr={sample_rate}"
        )
    if config.log_floor <= 0:
        raise InvalidConfig(f"log_floor must be positive, got {config.log_floor}")


def _hann_periodic(n: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def log_mel_spectrogram(clip: AudioClip, config: SpectrogramConfig) -> np.ndarray:
    """Hann-windowed power spectrogram projected onto mel filters, in log10.

    No padding: frame count is 1 + (len - n_fft) // hop, so trailing
    samples shorter than one hop never change the output. Values are
    floored at config.log_floor before the log.

    Returns a (frames, n_mels) float64 array. Raises NotMono or
    ClipTooShort.
    """
    if clip.channels != 1:
        raise NotMono(f"clip has {clip.channels} channels, embedding needs mono")
    fb = mel_filterbank(config, clip.sample_rate)
    x = np.asarray(clip.samples, dtype=np.float64)
    if len(x) < config.n_fft:
        raise ClipTooShort(f"{len(x)} samples < n_fft {config.n_fft}")
    n_frames = 1 + (len(x) - config.n_fft) // config.hop
    idx = np.arange(config.n_fft)[None, :] + config.hop * np.arange(n_frames)[:, None]
    frames = x[idx] * _hann_periodic(config.n_fft)[None, :]
    power = np.abs(np.fft.rfft(frames, axis=1)) ** 2
    mel = power @ fb.weights.T
    return np.log10(np.maximum(mel, config.log_floor))


def clip_embedding(clip: AudioClip, config: SpectrogramConfig | None = None) -> np.ndarray:
    """Pool a clip into a single 2*n_mels vector.

    Concatenates the per-band mean and the per-band population standard
    deviation (divide by frame count) over time. Deterministic: the same
    clip always yields the same bits.
    """
    config = config or SpectrogramConfig()
    spec = log_mel_spectrogram(clip, config)
    return np.concatenate([spec.mean(axis=0), spec.std(axis=0, ddof=0)])


def frame_embeddings(clip: AudioClip, config: SpectrogramConfig | None = None) -> np.ndarray:
    """Per-frame mode: every spectrogram frame becomes one n_mels vector."""
    config = config or SpectrogramConfig()
    return log_mel_spectrogram(clip, config)


def write_embeddings(embedding_set: EmbeddingSet, path: str | Path) -> None:
    """Write a set in the AEB1 format (see module docstring)."""
    path = Path(path)
    header = _HEADER.pack(AEB1_MAGIC, embedding_set.dim, embedding_set.count)
    payload = np.ascontiguousarray(embedding_set.vectors, dtype="<f4").tobytes()
    path.write_bytes(header + payload)


def read_embeddings(path: str | Path) -> EmbeddingSet:
    """Read an AEB1 file; the label is set to the file name.

    Raises BadMagic or TruncatedFile (also used when the payload size does
    not match the header-declared count and dimension).
    """
    path = Path(path)
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise TruncatedFile(f"{path}: {len(data)} bytes, header needs {_HEADER.size}")
    magic, dim, count = _HEADER.unpack_from(data, 0)
    if magic != AEB1_MAGIC:
        raise BadMagic(f"{path}: bad magic {magic!r}")
    expected = _HEADER.size + count * dim * 4
    if len(data) != expected:
        raise TruncatedFile(
            f"{path}: {len(data)} bytes, header declares {count}x{dim} "
            f"vectors = {expected} bytes"
        )
    vectors = np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(count, dim)
    return EmbeddingSet(vectors=vectors.copy(), label=path.name)
