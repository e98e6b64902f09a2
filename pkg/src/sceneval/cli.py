"""Command-line entry point for the evaluation pipeline.

Subcommands mirror the challenge workflow so each stage's artefact is
inspectable on disk: validate, embed, fad, score, rank, report, serve.
Exit codes: 0 success, 1 data error, 2 usage error. Diagnostics go to
stderr; results go to files or stdout. All randomness is seeded via flags
(SCENEVAL_SEED supplies the default), so identical invocations produce
byte-identical outputs.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import audio_io, dataset, fad, features, report as report_mod, subjective
from .errors import ScenevalError


def _default_seed() -> int:
    return int(os.environ.get("SCENEVAL_SEED", "0"))


def _resolve_audio(entry: dataset.ManifestEntry, manifest_path: Path, audio_dir: str | None) -> Path:
    base = Path(audio_dir) if audio_dir else manifest_path.parent
    return base / entry.file_path


def _manifest_entries(manifest: str, split: str) -> list[dataset.ManifestEntry]:
    entries = dataset.load_manifest(manifest)
    if split != "all":
        entries = [e for e in entries if e.split == split]
    return entries


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _require_inputs(*paths: str | None) -> None:
    """Fail fast on missing input paths before any work starts."""
    for path in paths:
        if path is not None and not Path(path).exists():
            raise ScenevalError(f"input path does not exist: {path}")


# -- subcommands -----------------------------------------------------------


def cmd_validate(args: argparse.Namespace) -> int:
    _require_inputs(args.manifest, args.audio_dir)
    manifest_path = Path(args.manifest)
    entries = _manifest_entries(args.manifest, args.split)
    passed = 0
    for entry in entries:
        path = _resolve_audio(entry, manifest_path, args.audio_dir)
        try:
            clip = audio_io.decode_wav(path.read_bytes())
        except (OSError, ScenevalError) as exc:
            print(f"{entry.clip_id}: {exc}", file=sys.stderr)
            continue
        result = audio_io.validate_clip(clip)
        if result.passed:
            passed += 1
        else:
            for name, expected, actual in result.violations:
                print(
                    f"{entry.clip_id}: {name} expected {expected}, got {actual}",
                    file=sys.stderr,
                )
    print(f"{passed}/{len(entries)} passed")
    return 0 if passed == len(entries) else 1


def cmd_embed(args: argparse.Namespace) -> int:
    _require_inputs(args.manifest, args.audio_dir)
    config = features.SpectrogramConfig()
    if args.manifest:
        manifest_path = Path(args.manifest)
        entries = _manifest_entries(args.manifest, args.split)
        paths = [_resolve_audio(e, manifest_path, args.audio_dir) for e in entries]
    else:
        if not args.audio_dir:
            raise ScenevalError("embed needs --manifest or --audio-dir")
        paths = sorted(Path(args.audio_dir).glob("*.wav"))
        if not paths:
            raise ScenevalError(f"no .wav files under {args.audio_dir}")

    def embed_one(path: Path):
        clip = audio_io.decode_wav(path.read_bytes())
        if args.frame_level:
            return features.frame_embeddings(clip, config)
        return features.clip_embedding(clip, config)

    with ThreadPoolExecutor(max_workers=args.workers) as pool:
        results = list(pool.map(embed_one, paths))

    label = args.label or Path(args.output).stem
    if args.frame_level:
        import numpy as np

        embedding_set = features.EmbeddingSet(
            vectors=np.concatenate(results, axis=0), label=label
        )
    else:
        embedding_set = features.EmbeddingSet.from_vectors(results, label=label)
    features.write_embeddings(embedding_set, args.output)
    print(
        f"embedded {len(paths)} clips -> {args.output} "
        f"({embedding_set.count} x {embedding_set.dim})",
        file=sys.stderr,
    )
    return 0


def cmd_fad(args: argparse.Namespace) -> int:
    _require_inputs(args.reference, args.generated)
    reference = features.read_embeddings(args.reference)
    generated = features.read_embeddings(args.generated)
    result = fad.fad_score(reference, generated)
    _emit(json.dumps(result.as_dict(), indent=2) + "\n", args.output)
    return 0


def cmd_score(args: argparse.Namespace) -> int:
    _require_inputs(args.ratings, args.system_teams)
    records = subjective.load_ratings(args.ratings)
    alpha = None
    if args.alpha:
        item = {"clip": "clip", "clip-system": "clip_system"}[args.alpha]
        matrix = subjective.ratings_matrix(records, metric=args.alpha_metric, item=item)
        alpha = subjective.cronbach_alpha(matrix)
    if args.system_teams:
        system_teams = json.loads(Path(args.system_teams).read_text(encoding="utf-8"))
        records = subjective.filter_self_ratings(records, system_teams)
    scores = subjective.aggregate_scores(records)
    payload = {
        "systems": [s.as_dict() for s in scores],
        "cronbach_alpha": alpha,
    }
    _emit(json.dumps(payload, indent=2) + "\n", args.output)
    return 0


def _load_fad_table(path: str) -> dict[str, float]:
    table: dict[str, float] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["system_code", "fad"]:
            raise ScenevalError(f"{path}: expected header system_code,fad, got {header!r}")
        for row_num, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ScenevalError(f"{path}:{row_num}: expected 2 fields")
            table[row[0]] = float(row[1])
    return table


def cmd_rank(args: argparse.Namespace) -> int:
    _require_inputs(args.scores, args.fad_table)
    payload = json.loads(Path(args.scores).read_text(encoding="utf-8"))
    systems = payload["systems"] if isinstance(payload, dict) else payload
    fad_table = _load_fad_table(args.fad_table)
    reports = []
    for s in systems:
        code = s["system_code"]
        if code not in fad_table:
            raise ScenevalError(f"no FAD value for system {code!r} in {args.fad_table}")
        reports.append(
            report_mod.SystemReport(
                system_code=code,
                perceptual=s["perceptual"],
                ff_mean=s["ff_mean"],
                bf_mean=s["bf_mean"],
                aq_mean=s["aq_mean"],
                fad=fad_table[code],
            )
        )
    ranked_codes = (
        [c for c in args.ranked.split(",") if c]
        if args.ranked
        else [r.system_code for r in reports]
    )
    ranked = report_mod.rank_systems(reports, ranked_codes)
    _emit(json.dumps([r.as_dict() for r in ranked], indent=2) + "\n", args.output)
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    _require_inputs(args.systems)
    rows = json.loads(Path(args.systems).read_text(encoding="utf-8"))
    systems = [
        report_mod.SystemReport(
            system_code=row["code"],
            perceptual=row["perceptual"],
            ff_mean=row["ff"],
            bf_mean=row["bf"],
            aq_mean=row["aq"],
            fad=row["fad"],
            official_rank=row.get("rank"),
        )
        for row in rows
    ]
    try:
        correlations = report_mod.compute_correlations(systems, args.reference_code)
    except report_mod.DegenerateVariance as exc:
        print(f"skipping correlations: {exc}", file=sys.stderr)
        correlations = []
    document = report_mod.generate_report(
        systems, correlations, reference_code=args.reference_code
    )
    paths = report_mod.write_report(document, args.output_dir)
    if not args.no_figures:
        from .figures import render_figures

        for fig_path in render_figures(document, args.output_dir):
            paths[fig_path.stem] = fig_path
    for name, path in sorted(paths.items()):
        print(f"wrote {name}: {path}", file=sys.stderr)
    sys.stdout.write(document.text_table())
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    _require_inputs(args.manifest, args.audio_dir, args.systems, args.ui_dir)
    from . import service as service_mod

    entries = _manifest_entries(args.manifest, "evaluation")
    clips = dataset.stratified_select(entries, args.per_category, args.seed)
    system_teams = json.loads(Path(args.systems).read_text(encoding="utf-8"))
    config = service_mod.ServiceConfig(
        clips=clips,
        system_teams=system_teams,
        audio_dir=Path(args.audio_dir),
        seed=args.seed,
        organizer_token=args.organizer_token,
        log_path=Path(args.log),
    )
    service = service_mod.ListeningService(config)
    service.check_audio_files()
    app = service_mod.build_app(service, ui_dir=args.ui_dir)
    print(
        f"serving {len(clips)} clips x {len(system_teams)} systems "
        f"on {args.host}:{args.port}",
        file=sys.stderr,
    )
    import uvicorn

    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# -- argument parsing -------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sceneval",
        description="Evaluate text-to-sound-scene synthesis systems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check audio files against the format constraints")
    p.add_argument("--manifest", required=True)
    p.add_argument("--audio-dir", default=None)
    p.add_argument("--split", default="all", choices=["all", *dataset.SPLITS])
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("embed", help="compute pooled log-mel embeddings into an AEB1 file")
    p.add_argument("--manifest", default=None)
    p.add_argument("--audio-dir", default=None)
    p.add_argument("--split", default="all", choices=["all", *dataset.SPLITS])
    p.add_argument("--output", required=True)
    p.add_argument("--frame-level", action="store_true",
                   help="one embedding per spectrogram frame instead of per clip")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--label", default=None)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("fad", help="Frechet Audio Distance between two embedding files")
    p.add_argument("--reference", required=True)
    p.add_argument("--generated", required=True)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_fad)

    p = sub.add_parser("score", help="aggregate listening-test ratings per system")
    p.add_argument("--ratings", required=True)
    p.add_argument("--system-teams", default=None,
                   help="JSON map of system code to team id; enables self-rating removal")
    p.add_argument("--alpha", default=None, choices=["clip", "clip-system"],
                   help="also compute Cronbach's alpha with this item unit")
    p.add_argument("--alpha-metric", default="perceptual",
                   choices=["ff", "bf", "aq", "perceptual"])
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("rank", help="attach FAD values and assign official ranks")
    p.add_argument("--scores", required=True, help="JSON from the score subcommand")
    p.add_argument("--fad-table", required=True, help="CSV with header system_code,fad")
    p.add_argument("--ranked", default=None,
                   help="comma-separated codes to rank (default: all)")
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("report", help="emit the JSON/text/scatter/figure report bundle")
    p.add_argument("--systems", required=True, help="JSON from the rank subcommand")
    p.add_argument("--reference-code", default=None)
    p.add_argument("--output-dir", required=True)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="run the blinded listening-test service")
    p.add_argument("--manifest", required=True)
    p.add_argument("--audio-dir", required=True)
    p.add_argument("--systems", required=True,
                   help="JSON map of real system name to team id")
    p.add_argument("--organizer-token", required=True)
    p.add_argument("--per-category", type=int, default=4)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--log", default="ratings.jsonl")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--ui-dir", default=None)
    p.set_defaults(func=cmd_serve)

    return parser


def run(argv: list[str] | None = None) -> int:
    """Parse arguments and dispatch; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ScenevalError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
