"""Listening-test ratings: ingestion, protocol filters, scores, reliability.

Each record carries three 0-10 judgments of one clip from one blinded
system: foreground fit (FF), background fit (BF) and overall audio quality
(AQ). The weighted perceptual score doubles the foreground weight:
(2*FF + BF + AQ) / 4.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ScenevalError

RATINGS_HEADER = ["rater_id", "team_id", "system_code", "clip_id", "ff", "bf", "aq"]
SCORE_MIN = 0.0
SCORE_MAX = 10.0


class ParseError(ScenevalError):
    pass


class ScoreOutOfRange(ScenevalError):
    pass


class UnknownSystemCode(ScenevalError):
    pass


class EmptySystem(ScenevalError):
    pass


class DegenerateTotalVariance(ScenevalError):
    pass


class TooFewRaters(ScenevalError):
    pass


class MissingCells(ScenevalError):
    pass


@dataclass(frozen=True)
class RatingRecord:
    rater_id: str
    team_id: str
    system_code: str
    clip_id: str
    ff: float
    bf: float
    aq: float


@dataclass(frozen=True)
class SystemScores:
    system_code: str
    ff_mean: float
    bf_mean: float
    aq_mean: float
    perceptual: float
    n_ratings: int

    def as_dict(self) -> dict:
        return {
            "system_code": self.system_code,
            "ff_mean": self.ff_mean,
            "bf_mean": self.bf_mean,
            "aq_mean": self.aq_mean,
            "perceptual": self.perceptual,
            "n_ratings": self.n_ratings,
        }


def _check_score(name: str, value: float, context: str = "") -> float:
    value = float(value)
    if not (SCORE_MIN <= value <= SCORE_MAX) or value != value:
        where = f" ({context})" if context else ""
        raise ScoreOutOfRange(f"{name}={value} outside [0, 10]{where}")
    return value


def load_ratings(path: str | Path) -> list[RatingRecord]:
    """Load the ratings CSV (header rater_id,team_id,system_code,clip_id,ff,bf,aq).

    Raises ParseError or ScoreOutOfRange, both naming the offending row.
    """
    path = Path(path)
    records: list[RatingRecord] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: missing header row")
        if header != RATINGS_HEADER:
            raise ParseError(f"{path}: bad header {header!r}, expected {RATINGS_HEADER!r}")
        for row_num, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(RATINGS_HEADER):
                raise ParseError(
                    f"{path}:{row_num}: expected {len(RATINGS_HEADER)} fields, got {len(row)}"
                )
            rater_id, team_id, system_code, clip_id, ff_raw, bf_raw, aq_raw = row
            try:
                ff, bf, aq = float(ff_raw), float(bf_raw), float(aq_raw)
            except ValueError:
                raise ParseError(f"{path}:{row_num}: non-numeric score")
            records.append(
                RatingRecord(
                    rater_id=rater_id,
                    team_id=team_id,
                    system_code=system_code,
                    clip_id=clip_id,
                    ff=_check_score("ff", ff, f"{path}:{row_num}"),
                    bf=_check_score("bf", bf, f"{path}:{row_num}"),
                    aq=_check_score("aq", aq, f"{path}:{row_num}"),
                )
            )
    return records


def write_ratings(records: Iterable[RatingRecord], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(RATINGS_HEADER)
        for r in records:
            writer.writerow(
                [r.rater_id, r.team_id, r.system_code, r.clip_id, r.ff, r.bf, r.aq]
            )


def filter_self_ratings(
    records: Sequence[RatingRecord], system_teams: Mapping[str, str]
) -> list[RatingRecord]:
    """Drop every rating a rater gave to their own team's system.

    ``system_teams`` maps blinded system code to the submitting team.
    Order is otherwise preserved; applying the filter twice is a no-op.
    Raises UnknownSystemCode when a record's system is not in the map.
    """
    kept: list[RatingRecord] = []
    for record in records:
        if record.system_code not in system_teams:
            raise UnknownSystemCode(f"system code {record.system_code!r} not in team map")
        if record.team_id != system_teams[record.system_code]:
            kept.append(record)
    return kept


def perceptual_score(ff: float, bf: float, aq: float) -> float:
    """Weighted perceptual score (2*FF + BF + AQ) / 4, inputs in [0, 10]."""
    ff = _check_score("ff", ff)
    bf = _check_score("bf", bf)
    aq = _check_score("aq", aq)
    return (2.0 * ff + bf + aq) / 4.0


def aggregate_scores(records: Sequence[RatingRecord]) -> list[SystemScores]:
    """Per-system means of FF/BF/AQ with the perceptual score on the means.

    For a balanced design this equals the mean of per-record perceptual
    scores, by linearity; for unbalanced data the means-first form is the
    documented choice. Output is sorted by system code. Raises EmptySystem
    when there are no records at all.
    """
    if not records:
        raise EmptySystem("no rating records to aggregate")
    by_system: dict[str, list[RatingRecord]] = {}
    for record in records:
        by_system.setdefault(record.system_code, []).append(record)
    out = []
    for code in sorted(by_system):
        group = by_system[code]
        ff = float(np.mean([r.ff for r in group]))
        bf = float(np.mean([r.bf for r in group]))
        aq = float(np.mean([r.aq for r in group]))
        out.append(
            SystemScores(
                system_code=code,
                ff_mean=ff,
                bf_mean=bf,
                aq_mean=aq,
                perceptual=(2.0 * ff + bf + aq) / 4.0,
                n_ratings=len(group),
            )
        )
    return out


def cronbach_alpha(matrix) -> float:
    """Cronbach's alpha over an items x raters score matrix.

    alpha = k/(k-1) * (1 - sum_i var(rater_i) / var(item-wise sums)), with
    unbiased (n-1) variances. Raters are the columns; what counts as an
    item (clip, or clip x system pair) is the caller's choice, so the
    matrix orientation is an explicit input.

    Raises TooFewRaters, MissingCells (NaN cells) or
    DegenerateTotalVariance (fewer than two items, or constant sums).
    """
    scores = np.asarray(matrix, dtype=np.float64)
    if scores.ndim != 2:
        raise MissingCells(f"expected a 2-D items x raters matrix, got shape {scores.shape}")
    if np.isnan(scores).any():
        raise MissingCells("matrix has missing cells; impute or drop before calling")
    n_items, k = scores.shape
    if k < 2:
        raise TooFewRaters(f"need >= 2 raters, got {k}")
    if n_items < 2:
        raise DegenerateTotalVariance(f"need >= 2 items, got {n_items}")
    rater_variances = scores.var(axis=0, ddof=1)
    total_variance = scores.sum(axis=1).var(ddof=1)
    if total_variance == 0.0:
        raise DegenerateTotalVariance("variance of item-wise sums is zero")
    return float(k / (k - 1) * (1.0 - rater_variances.sum() / total_variance))


def ratings_matrix(
    records: Sequence[RatingRecord],
    metric: str = "perceptual",
    item: str = "clip_system",
) -> np.ndarray:
    """Pivot records into the items x raters matrix cronbach_alpha expects.

    ``metric`` is one of ff, bf, aq, perceptual; ``item`` is "clip" or
    "clip_system". Raises MissingCells when the design is not fully
    crossed (including duplicate cells).
    """
    if metric not in ("ff", "bf", "aq", "perceptual"):
        raise ValueError(f"unknown metric {metric!r}")
    if item not in ("clip", "clip_system"):
        raise ValueError(f"unknown item unit {item!r}")

    def value(r: RatingRecord) -> float:
        if metric == "perceptual":
            return (2.0 * r.ff + r.bf + r.aq) / 4.0
        return getattr(r, metric)

    def item_key(r: RatingRecord):
        return (r.clip_id, r.system_code) if item == "clip_system" else r.clip_id

    raters = sorted({r.rater_id for r in records})
    items = sorted({item_key(r) for r in records})
    rater_index = {r: j for j, r in enumerate(raters)}
    item_index = {it: i for i, it in enumerate(items)}

    matrix = np.full((len(items), len(raters)), np.nan)
    for r in records:
        i, j = item_index[item_key(r)], rater_index[r.rater_id]
        if not np.isnan(matrix[i, j]):
            raise MissingCells(
                f"duplicate cell for item {item_key(r)!r}, rater {r.rater_id!r}"
            )
        matrix[i, j] = value(r)
    if np.isnan(matrix).any():
        raise MissingCells("design is not fully crossed (missing item x rater cells)")
    return matrix
