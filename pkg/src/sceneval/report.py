"""Ranking, FAD-vs-subjective correlation, reference gap and report output.

Correlations are kept signed (FAD against a quality score is negative);
the report prints both r and |r| since headline figures usually quote the
magnitude. The challenge's published headline for the reference-vs-best
gap was 36%; the computed value from the published scores is lower, so the
report states the computed number and flags the delta instead of silently
matching the headline.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ScenevalError

# Headline relative gap published with the challenge results.
REPORTED_CHALLENGE_GAP = 0.36

SCATTER_METRICS = ("ff", "bf", "aq", "perceptual")
SCATTER_HEADER = ["fad", "metric_value", "system_code"]


class LengthMismatch(ScenevalError):
    pass


class DegenerateVariance(ScenevalError):
    pass


class UnknownCode(ScenevalError):
    pass


class NonPositiveReference(ScenevalError):
    pass


@dataclass(frozen=True)
class CorrelationResult:
    r: float
    n: int


@dataclass(frozen=True)
class SystemReport:
    """Per-system aggregate row; official_rank is None for the reference
    and any unranked baseline."""

    system_code: str
    perceptual: float
    ff_mean: float
    bf_mean: float
    aq_mean: float
    fad: float
    official_rank: int | None = None

    def as_dict(self) -> dict:
        return {
            "code": self.system_code,
            "rank": self.official_rank,
            "perceptual": self.perceptual,
            "ff": self.ff_mean,
            "bf": self.bf_mean,
            "aq": self.aq_mean,
            "fad": self.fad,
        }


@dataclass(frozen=True)
class GapSummary:
    reference: float
    best: float
    relative: float

    def as_dict(self) -> dict:
        return {
            "reference": self.reference,
            "best": self.best,
            "relative": self.relative,
            "reported": REPORTED_CHALLENGE_GAP,
            "delta_vs_reported": self.relative - REPORTED_CHALLENGE_GAP,
        }


def pearson_correlation(x: Sequence[float], y: Sequence[float]) -> CorrelationResult:
    """Pearson product-moment correlation of two equal-length sequences.

    Raises LengthMismatch, or DegenerateVariance when either sequence is
    constant (or shorter than two points).
    """
    if len(x) != len(y):
        raise LengthMismatch(f"lengths differ: {len(x)} vs {len(y)}")
    n = len(x)
    if n < 2:
        raise DegenerateVariance(f"need >= 2 points, got {n}")
    mx = math.fsum(x) / n
    my = math.fsum(y) / n
    sxx = math.fsum((a - mx) ** 2 for a in x)
    syy = math.fsum((b - my) ** 2 for b in y)
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateVariance("constant sequence has no defined correlation")
    sxy = math.fsum((a - mx) * (b - my) for a, b in zip(x, y))
    return CorrelationResult(r=sxy / math.sqrt(sxx * syy), n=n)


def rank_systems(
    reports: Sequence[SystemReport], ranked_codes: Iterable[str]
) -> list[SystemReport]:
    """Assign contiguous ranks 1..k to the systems in ``ranked_codes``.

    Ranking is by descending perceptual score; ties break by ascending FAD
    (the objective metric is the natural secondary key), then by system
    code. Systems outside ranked_codes (the reference, an unranked
    baseline) carry no rank. The returned list is sorted the same way, so
    the reference heads the table when it scores highest.
    """
    ranked_codes = set(ranked_codes)
    known = {r.system_code for r in reports}
    unknown = ranked_codes - known
    if unknown:
        raise UnknownCode(f"ranked codes not present in reports: {sorted(unknown)}")

    def sort_key(r: SystemReport):
        return (-r.perceptual, r.fad, r.system_code)

    ordered = sorted(reports, key=sort_key)
    out: list[SystemReport] = []
    next_rank = 1
    for r in ordered:
        if r.system_code in ranked_codes:
            out.append(replace(r, official_rank=next_rank))
            next_rank += 1
        else:
            out.append(replace(r, official_rank=None))
    return out


def reference_gap(reference_score: float, best_system_score: float) -> float:
    """Relative shortfall of the best system against the reference."""
    if reference_score <= 0:
        raise NonPositiveReference(f"reference score must be positive, got {reference_score}")
    return (reference_score - best_system_score) / reference_score


@dataclass(frozen=True)
class ReportDocument:
    """Assembled report: systems in table order, named correlations, gap."""

    systems: tuple[SystemReport, ...]
    correlations: tuple[tuple[str, CorrelationResult], ...]
    gap: GapSummary | None
    reference_code: str | None

    def as_json_dict(self) -> dict:
        return {
            "systems": [s.as_dict() for s in self.systems],
            "correlations": [
                {"name": name, "r": c.r, "abs_r": abs(c.r), "n": c.n}
                for name, c in self.correlations
            ],
            "gap": self.gap.as_dict() if self.gap else None,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_json_dict(), indent=2)

    def text_table(self) -> str:
        """Plain-text table: code, rank, perceptual score, FAD."""
        rows = [["System", "Rank", "Score", "FAD"]]
        for s in self.systems:
            rows.append(
                [
                    s.system_code,
                    "-" if s.official_rank is None else str(s.official_rank),
                    f"{s.perceptual:.3f}",
                    f"{s.fad:.3f}",
                ]
            )
        widths = [max(len(row[i]) for row in rows) for i in range(4)]
        lines = [
            "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
            for row in rows
        ]
        if self.correlations:
            lines.append("")
            lines.append("Correlations against FAD (signed r, |r|, n):")
            for name, c in self.correlations:
                lines.append(f"  {name}: r={c.r:+.4f}  |r|={abs(c.r):.4f}  n={c.n}")
        if self.gap:
            lines.append("")
            lines.append(
                f"Reference gap: ({self.gap.reference:.3f} - {self.gap.best:.3f})"
                f" / {self.gap.reference:.3f} = {self.gap.relative:.2%}"
            )
            lines.append(
                f"  note: differs from the {REPORTED_CHALLENGE_GAP:.0%} headline figure "
                f"by {self.gap.relative - REPORTED_CHALLENGE_GAP:+.2%}"
            )
        return "\n".join(lines) + "\n"

    def scatter_points(self) -> dict[str, list[tuple[float, float, str]]]:
        """(fad, metric value, code) per metric, excluding the reference."""
        metric_of = {
            "ff": lambda s: s.ff_mean,
            "bf": lambda s: s.bf_mean,
            "aq": lambda s: s.aq_mean,
            "perceptual": lambda s: s.perceptual,
        }
        included = [s for s in self.systems if s.system_code != self.reference_code]
        return {
            metric: [(s.fad, metric_of[metric](s), s.system_code) for s in included]
            for metric in SCATTER_METRICS
        }


def compute_correlations(
    systems: Sequence[SystemReport], reference_code: str | None = None
) -> list[tuple[str, CorrelationResult]]:
    """Signed Pearson r of FAD against each subjective metric.

    The reference is excluded: its FAD is zero by construction and would
    not describe a synthesis system.
    """
    included = [s for s in systems if s.system_code != reference_code]
    fads = [s.fad for s in included]
    named = []
    for metric in SCATTER_METRICS:
        values = {
            "ff": [s.ff_mean for s in included],
            "bf": [s.bf_mean for s in included],
            "aq": [s.aq_mean for s in included],
            "perceptual": [s.perceptual for s in included],
        }[metric]
        named.append((metric, pearson_correlation(fads, values)))
    return named


def generate_report(
    reports: Sequence[SystemReport],
    correlations: Sequence[tuple[str, CorrelationResult]],
    reference_code: str | None = None,
) -> ReportDocument:
    """Assemble the report document from ranked system rows.

    When ``reference_code`` is given, the gap compares the reference's
    perceptual score against the best ranked system.
    """
    gap = None
    if reference_code is not None:
        by_code = {r.system_code: r for r in reports}
        if reference_code not in by_code:
            raise UnknownCode(f"reference code {reference_code!r} not in reports")
        ranked = [r for r in reports if r.official_rank is not None]
        if ranked:
            best = min(ranked, key=lambda r: r.official_rank)
            ref_score = by_code[reference_code].perceptual
            gap = GapSummary(
                reference=ref_score,
                best=best.perceptual,
                relative=reference_gap(ref_score, best.perceptual),
            )
    return ReportDocument(
        systems=tuple(reports),
        correlations=tuple(correlations),
        gap=gap,
        reference_code=reference_code,
    )


def scatter_csv(points: list[tuple[float, float, str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SCATTER_HEADER)
    for fad, value, code in points:
        writer.writerow([repr(fad), repr(value), code])
    return buf.getvalue()


def write_report(document: ReportDocument, out_dir: str | Path) -> dict[str, Path]:
    """Write report.json, report.txt and one scatter CSV per metric.

    Returns the paths written, keyed by artefact name. Figures are
    rendered separately (see sceneval.figures) so headless report runs do
    not need a plotting stack.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}

    json_path = out_dir / "report.json"
    json_path.write_text(document.to_json() + "\n", encoding="utf-8")
    paths["json"] = json_path

    txt_path = out_dir / "report.txt"
    txt_path.write_text(document.text_table(), encoding="utf-8")
    paths["text"] = txt_path

    for metric, points in document.scatter_points().items():
        path = out_dir / f"scatter_{metric}.csv"
        path.write_text(scatter_csv(points), encoding="utf-8")
        paths[f"scatter_{metric}"] = path
    return paths
