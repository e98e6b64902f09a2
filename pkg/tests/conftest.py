import numpy as np
import pytest

from sceneval.audio_io import AudioClip, encode_wav
from sceneval.dataset import (
    BackgroundCategory,
    ForegroundCategory,
    ManifestEntry,
    format_caption,
)

BG_CYCLE = list(BackgroundCategory)


def make_clip(samples, sample_rate=32000, bit_depth=16, channels=1) -> AudioClip:
    return AudioClip(
        samples=np.asarray(samples, dtype=np.float64),
        sample_rate=sample_rate,
        bit_depth=bit_depth,
        channels=channels,
    )


def conforming_samples(seed=0, frames=128000):
    rng = np.random.default_rng(seed)
    x = 0.1 * rng.standard_normal(frames)
    # quantise to the 16-bit grid so decode(encode(clip)) == clip
    return np.round(np.clip(x, -1, 1) * 32768).clip(-32768, 32767) / 32768


def conforming_wav_bytes(seed=0) -> bytes:
    return encode_wav(make_clip(conforming_samples(seed)))


def synth_manifest(per_category=4, split="evaluation", prefix="clip"):
    """One entry per (category, index); file paths follow <clip_id>.wav."""
    entries = []
    i = 0
    for cat in ForegroundCategory:
        for k in range(per_category):
            clip_id = f"{prefix}-{cat.value.lower()}-{k:02d}"
            bg = BG_CYCLE[i % len(BG_CYCLE)]
            entries.append(
                ManifestEntry(
                    clip_id=clip_id,
                    file_path=f"{clip_id}.wav",
                    caption=format_caption(f"a {cat.value.lower()} sound", bg.value.lower()),
                    fg_category=cat,
                    bg_category=bg,
                    split=split,
                )
            )
            i += 1
    return entries


@pytest.fixture
def manifest_entries():
    return synth_manifest(per_category=5)
