"""RIFF/WAVE decoding and enforcement of the challenge audio format.

Submissions must be 4-second 16-bit mono PCM at 32 kHz. Decoding is
lossless for integer PCM: samples are scaled by 2^(bit_depth-1), so
re-quantising a decoded clip reproduces the original integers exactly.
Non-conforming audio is reported, never resampled or converted.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import ScenevalError

REQUIRED_CHANNELS = 1
REQUIRED_BIT_DEPTH = 16
REQUIRED_SAMPLE_RATE = 32000
REQUIRED_FRAMES = 128000  # 4 s at 32 kHz

_PCM_FORMAT_TAG = 1
_SUPPORTED_BIT_DEPTHS = (8, 16, 24, 32)


class NotRiff(ScenevalError):
    pass


class UnsupportedEncoding(ScenevalError):
    pass


class TruncatedChunk(ScenevalError):
    pass


@dataclass(frozen=True)
class AudioClip:
    """Decoded PCM audio.

    ``samples`` holds float64 amplitudes in [-1, 1], interleaved when there
    is more than one channel, so len(samples) == frames * channels.
    """

    samples: np.ndarray
    sample_rate: int
    bit_depth: int
    channels: int

    @property
    def frames(self) -> int:
        return len(self.samples) // self.channels

    @property
    def duration(self) -> float:
        return self.frames / self.sample_rate


@dataclass(frozen=True)
class ConstraintReport:
    passed: bool
    violations: list[tuple[str, Any, Any]]


def decode_wav(data: bytes) -> AudioClip:
    """Decode a RIFF/WAVE byte string holding integer PCM.

    Walks the chunk list, skipping unknown chunks (chunks are padded to even
    offsets per RIFF). Only format tag 1 (integer PCM, little-endian) is
    accepted, at 8/16/24/32 bits per sample.

    Raises NotRiff, UnsupportedEncoding or TruncatedChunk.
    """
    if len(data) < 12 or data[0:4] != b"RIFF":
        raise NotRiff("input does not start with a RIFF header")
    if data[8:12] != b"WAVE":
        raise NotRiff("RIFF container is not WAVE")

    fmt: tuple[int, int, int] | None = None  # channels, sample_rate, bit_depth
    pcm: bytes | None = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos : pos + 4]
        (chunk_size,) = struct.unpack_from("<I", data, pos + 4)
        body_start = pos + 8
        if body_start + chunk_size > len(data):
            raise TruncatedChunk(
                f"chunk {chunk_id!r} declares {chunk_size} bytes, "
                f"{len(data) - body_start} available"
            )
        body = data[body_start : body_start + chunk_size]
        if chunk_id == b"fmt ":
            if chunk_size < 16:
                raise TruncatedChunk(f"fmt chunk too small ({chunk_size} bytes)")
            format_tag, channels, sample_rate, _, _, bit_depth = struct.unpack_from(
                "<HHIIHH", body, 0
            )
            if format_tag != _PCM_FORMAT_TAG:
                raise UnsupportedEncoding(f"format tag {format_tag}, only PCM (1) supported")
            if bit_depth not in _SUPPORTED_BIT_DEPTHS:
                raise UnsupportedEncoding(f"unsupported bit depth {bit_depth}")
            if channels < 1:
                raise UnsupportedEncoding("fmt chunk declares zero channels")
            fmt = (channels, sample_rate, bit_depth)
        elif chunk_id == b"data":
            pcm = body
        pos = body_start + chunk_size + (chunk_size & 1)

    if fmt is None:
        raise TruncatedChunk("no fmt chunk found")
    if pcm is None:
        raise TruncatedChunk("no data chunk found")

    channels, sample_rate, bit_depth = fmt
    bytes_per_sample = bit_depth // 8
    frame_size = bytes_per_sample * channels
    if len(pcm) % frame_size != 0:
        raise TruncatedChunk(
            f"data chunk of {len(pcm)} bytes is not a whole number of "
            f"{frame_size}-byte frames"
        )

    if bit_depth == 8:
        # 8-bit WAV is unsigned with a 128 offset.
        ints = np.frombuffer(pcm, dtype=np.uint8).astype(np.int64) - 128
    elif bit_depth == 16:
        ints = np.frombuffer(pcm, dtype="<i2").astype(np.int64)
    elif bit_depth == 24:
        raw = np.frombuffer(pcm, dtype=np.uint8).reshape(-1, 3).astype(np.int64)
        ints = raw[:, 0] | (raw[:, 1] << 8) | (raw[:, 2] << 16)
        ints -= (ints & 0x800000) << 1  # sign extend
    else:
        ints = np.frombuffer(pcm, dtype="<i4").astype(np.int64)

    samples = ints.astype(np.float64) / float(1 << (bit_depth - 1))
    return AudioClip(
        samples=samples,
        sample_rate=sample_rate,
        bit_depth=bit_depth,
        channels=channels,
    )


def encode_wav(clip: AudioClip) -> bytes:
    """Serialise a clip back to a minimal RIFF/WAVE byte string.

    Quantises with round-half-away and clips to the integer range, so a
    decoded clip re-encodes to its original bytes. Used for synthesising
    fixtures and for serving audio; only 8/16/24/32-bit PCM is produced.
    """
    if clip.bit_depth not in _SUPPORTED_BIT_DEPTHS:
        raise UnsupportedEncoding(f"unsupported bit depth {clip.bit_depth}")
    full = 1 << (clip.bit_depth - 1)
    ints = np.clip(
        np.round(np.asarray(clip.samples, dtype=np.float64) * full),
        -full,
        full - 1,
    ).astype(np.int64)
    if clip.bit_depth == 8:
        pcm = (ints + 128).astype(np.uint8).tobytes()
    elif clip.bit_depth == 16:
        pcm = ints.astype("<i2").tobytes()
    elif clip.bit_depth == 24:
        u = (ints & 0xFFFFFF).astype(np.uint32)
        raw = np.empty((len(u), 3), dtype=np.uint8)
        raw[:, 0] = u & 0xFF
        raw[:, 1] = (u >> 8) & 0xFF
        raw[:, 2] = (u >> 16) & 0xFF
        pcm = raw.tobytes()
    else:
        pcm = ints.astype("<i4").tobytes()

    bytes_per_sample = clip.bit_depth // 8
    block_align = bytes_per_sample * clip.channels
    byte_rate = clip.sample_rate * block_align
    fmt = struct.pack(
        "<HHIIHH",
        _PCM_FORMAT_TAG,
        clip.channels,
        clip.sample_rate,
        byte_rate,
        block_align,
        clip.bit_depth,
    )
    pad = b"\x00" if len(pcm) & 1 else b""
    chunks = (
        b"fmt " + struct.pack("<I", len(fmt)) + fmt
        + b"data" + struct.pack("<I", len(pcm)) + pcm + pad
    )
    return b"RIFF" + struct.pack("<I", 4 + len(chunks)) + b"WAVE" + chunks


def validate_clip(clip: AudioClip) -> ConstraintReport:
    """Check a decoded clip against the challenge constraints.

    Checks channels, bit depth, sample rate and exact duration (128000
    frames), in that order, and reports every violation rather than the
    first. Duration is counted in frames so it stays meaningful when the
    sample rate itself is wrong.
    """
    violations: list[tuple[str, Any, Any]] = []
    if clip.channels != REQUIRED_CHANNELS:
        violations.append(("channels", REQUIRED_CHANNELS, clip.channels))
    if clip.bit_depth != REQUIRED_BIT_DEPTH:
        violations.append(("bit_depth", REQUIRED_BIT_DEPTH, clip.bit_depth))
    if clip.sample_rate != REQUIRED_SAMPLE_RATE:
        violations.append(("sample_rate", REQUIRED_SAMPLE_RATE, clip.sample_rate))
    if clip.frames != REQUIRED_FRAMES:
        violations.append(("duration", REQUIRED_FRAMES, clip.frames))
    return ConstraintReport(passed=not violations, violations=violations)
