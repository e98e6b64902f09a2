"""Caption grammar, sound-category taxonomy, manifests and prompt selection.

Captions follow the fixed template "<foreground> with <background> in the
background". Category labels are carried by the manifest, never inferred
from the caption text, because the background phrase is free-form.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable

from .errors import ScenevalError
from .rng import SplitMix64

CAPTION_CONNECTIVE = " with "
CAPTION_SUFFIX = " in the background"
_TRAILING_PUNCTUATION = ".,!?;: \t"

MANIFEST_HEADER = [
    "clip_id",
    "file",
    "caption",
    "foreground_category",
    "background_category",
    "split",
]
SPLITS = ("development", "evaluation")


class ForegroundCategory(Enum):
    ANIMAL = "Animal"
    VEHICLE = "Vehicle"
    HUMAN = "Human"
    ALARM = "Alarm"
    TOOL = "Tool"
    ENTRANCE = "Entrance"


class BackgroundCategory(Enum):
    CROWD = "Crowd"
    TRAFFIC = "Traffic"
    WATER = "Water"
    BIRDS = "Birds"
    # Room tone: ambience with no discrete sound event.
    NOTHING = "Nothing"


_FG_ORDER = {cat: i for i, cat in enumerate(ForegroundCategory)}


class MalformedCaption(ScenevalError):
    pass


class ParseError(ScenevalError):
    pass


class DuplicateClipId(ScenevalError):
    pass


class UnknownCategory(ScenevalError):
    pass


class InsufficientCategory(ScenevalError):
    def __init__(self, category: ForegroundCategory, have: int, need: int):
        self.category = category
        super().__init__(
            f"category {category.value}: {have} evaluation entries, need {need}"
        )


@dataclass(frozen=True)
class CaptionPrompt:
    foreground_text: str
    background_text: str


@dataclass(frozen=True)
class ManifestEntry:
    clip_id: str
    file_path: str
    caption: str
    fg_category: ForegroundCategory
    bg_category: BackgroundCategory
    split: str


def format_caption(foreground_text: str, background_text: str) -> str:
    """Render the fixed prompt template."""
    return f"{foreground_text}{CAPTION_CONNECTIVE}{background_text}{CAPTION_SUFFIX}"


def parse_caption(caption: str) -> CaptionPrompt:
    """Split a templated caption into foreground and background text.

    The suffix match is case-insensitive and ignores trailing punctuation.
    The split uses the LAST " with " before the suffix, so foreground text
    containing "with" still parses; background phrases are short and never
    contain the connective in practice.

    Raises MalformedCaption when the suffix is absent, the connective is
    absent, or either side comes out blank.
    """
    if not caption or not caption.strip():
        raise MalformedCaption("empty caption")
    text = caption.rstrip(_TRAILING_PUNCTUATION)
    if not text.lower().endswith(CAPTION_SUFFIX):
        raise MalformedCaption(
            f"caption does not end with {CAPTION_SUFFIX!r}: {caption!r}"
        )
    body = text[: -len(CAPTION_SUFFIX)]
    cut = body.rfind(CAPTION_CONNECTIVE)
    if cut < 0:
        raise MalformedCaption(f"caption has no {CAPTION_CONNECTIVE!r}: {caption!r}")
    foreground = body[:cut]
    background = body[cut + len(CAPTION_CONNECTIVE):]
    if not foreground.strip() or not background.strip():
        raise MalformedCaption(f"caption side is empty: {caption!r}")
    return CaptionPrompt(foreground_text=foreground, background_text=background)


def load_manifest(path: str | Path) -> list[ManifestEntry]:
    """Load and validate a manifest CSV.

    Expects the exact header ``clip_id,file,caption,foreground_category,
    background_category,split``. Raises ParseError (with the offending row
    number), DuplicateClipId or UnknownCategory.
    """
    path = Path(path)
    entries: list[ManifestEntry] = []
    seen: set[str] = set()
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: missing header row")
        if header != MANIFEST_HEADER:
            raise ParseError(
                f"{path}: bad header {header!r}, expected {MANIFEST_HEADER!r}"
            )
        for row_num, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(MANIFEST_HEADER):
                raise ParseError(
                    f"{path}:{row_num}: expected {len(MANIFEST_HEADER)} fields, got {len(row)}"
                )
            clip_id, file_path, caption, fg_raw, bg_raw, split = row
            if not clip_id:
                raise ParseError(f"{path}:{row_num}: empty clip_id")
            if clip_id in seen:
                raise DuplicateClipId(f"{path}:{row_num}: duplicate clip_id {clip_id!r}")
            try:
                fg = ForegroundCategory(fg_raw)
            except ValueError:
                raise UnknownCategory(
                    f"{path}:{row_num}: unknown foreground category {fg_raw!r}"
                )
            try:
                bg = BackgroundCategory(bg_raw)
            except ValueError:
                raise UnknownCategory(
                    f"{path}:{row_num}: unknown background category {bg_raw!r}"
                )
            if split not in SPLITS:
                raise ParseError(f"{path}:{row_num}: unknown split {split!r}")
            seen.add(clip_id)
            entries.append(
                ManifestEntry(
                    clip_id=clip_id,
                    file_path=file_path,
                    caption=caption,
                    fg_category=fg,
                    bg_category=bg,
                    split=split,
                )
            )
    return entries


def stratified_select(
    entries: Iterable[ManifestEntry], per_category: int, seed: int
) -> list[ManifestEntry]:
    """Pick ``per_category`` entries for each foreground category.

    Each category group is canonicalised by clip_id, shuffled with a
    splitmix64 stream seeded by ``seed``, and truncated, so the selection is
    reproducible regardless of input order. The result is sorted by
    (category, clip_id); its size is always 6 * per_category.

    Raises InsufficientCategory naming the first category (in declaration
    order) that has too few entries.
    """
    if per_category < 1:
        raise ValueError("per_category must be >= 1")
    groups: dict[ForegroundCategory, list[ManifestEntry]] = {
        cat: [] for cat in ForegroundCategory
    }
    for entry in entries:
        groups[entry.fg_category].append(entry)

    rng = SplitMix64(seed)
    picked: list[ManifestEntry] = []
    for cat in ForegroundCategory:
        group = sorted(groups[cat], key=lambda e: e.clip_id)
        if len(group) < per_category:
            raise InsufficientCategory(cat, have=len(group), need=per_category)
        rng.shuffle(group)
        picked.extend(group[:per_category])
    picked.sort(key=lambda e: (_FG_ORDER[e.fg_category], e.clip_id))
    return picked


def write_manifest(entries: Iterable[ManifestEntry], path: str | Path) -> None:
    """Write entries back out in the manifest CSV format."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_HEADER)
        for e in entries:
            writer.writerow(
                [
                    e.clip_id,
                    e.file_path,
                    e.caption,
                    e.fg_category.value,
                    e.bg_category.value,
                    e.split,
                ]
            )
