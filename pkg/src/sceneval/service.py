"""Blinded listening sessions over HTTP.

System identities are replaced by opaque codes (SYS-A, SYS-B, ...) before
anything reaches a rater; un-blinding happens only in the organizer export.
Each session walks one seeded-shuffled playlist covering every clip x
system pair, strictly in order: skipping and re-rating are rejected.

Submissions are appended to a JSON-lines log and flushed to disk before
they are acknowledged, so a crashed service resumes by replaying the log.
"""

from __future__ import annotations

import csv
import io
import json
import os
import string
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from pydantic import BaseModel

from .dataset import ManifestEntry
from .errors import ScenevalError
from .rng import SplitMix64
from .subjective import (
    RatingRecord,
    ScoreOutOfRange,
    UnknownSystemCode,
    _check_score,
    filter_self_ratings,
)


class SessionRequest(BaseModel):
    rater_id: str
    team_id: str


class RatingRequest(BaseModel):
    clip_token: str
    ff: float
    bf: float
    aq: float


class DuplicateName(ScenevalError):
    pass


class EmptyClipSet(ScenevalError):
    pass


class OutOfOrderToken(ScenevalError):
    pass


class SessionComplete(ScenevalError):
    pass


class UnknownSession(ScenevalError):
    pass


class UnknownToken(ScenevalError):
    pass


class LogCorrupt(ScenevalError):
    pass


def _code_letters(index: int) -> str:
    """Spreadsheet-style letters: 0 -> A, 25 -> Z, 26 -> AA."""
    letters = ""
    index += 1
    while index > 0:
        index, rem = divmod(index - 1, 26)
        letters = string.ascii_uppercase[rem] + letters
    return letters


@dataclass(frozen=True)
class BlindMap:
    """Bijection between real system names and opaque codes."""

    code_by_name: Mapping[str, str]
    seed: int

    @property
    def name_by_code(self) -> dict[str, str]:
        return {code: name for name, code in self.code_by_name.items()}

    def codes(self) -> list[str]:
        return sorted(self.code_by_name.values())


def blind_systems(names: Sequence[str], seed: int) -> BlindMap:
    """Assign codes SYS-A, SYS-B, ... by a seeded permutation.

    Names are canonicalised by sorting first, so the same (names, seed)
    pair always produces the same map regardless of input order. Raises
    DuplicateName.
    """
    ordered = sorted(names)
    if len(set(ordered)) != len(ordered):
        dupes = sorted({n for n in ordered if ordered.count(n) > 1})
        raise DuplicateName(f"duplicate system names: {dupes}")
    codes = [f"SYS-{_code_letters(i)}" for i in range(len(ordered))]
    SplitMix64(seed).shuffle(codes)
    return BlindMap(code_by_name=dict(zip(ordered, codes)), seed=seed)


@dataclass(frozen=True)
class PlaylistItem:
    clip_token: str
    system_code: str
    clip_id: str
    caption: str


@dataclass
class Session:
    session_id: str
    rater_id: str
    team_id: str
    playlist: list[PlaylistItem]
    cursor: int = 0

    @property
    def completed(self) -> bool:
        return self.cursor >= len(self.playlist)

    @property
    def current(self) -> PlaylistItem:
        if self.completed:
            raise SessionComplete(f"session {self.session_id} has rated every item")
        return self.playlist[self.cursor]


def create_session(
    rater_id: str,
    team_id: str,
    clips: Sequence[ManifestEntry],
    systems: BlindMap,
    seed: int,
) -> Session:
    """Build a session whose playlist covers every clip x system pair.

    The order is a seeded shuffle of the full cartesian product, never
    grouped by system; clip tokens are opaque hex drawn from the same
    stream (no file names leak). Same seed, same playlist. Raises
    EmptyClipSet.
    """
    if not clips:
        raise EmptyClipSet("cannot create a session without clips")
    rng = SplitMix64(seed)
    session_id = rng.token(12)
    pairs = [(clip, code) for clip in clips for code in systems.codes()]
    rng.shuffle(pairs)
    playlist: list[PlaylistItem] = []
    used: set[str] = set()
    for clip, code in pairs:
        token = rng.token(8)
        while token in used:
            token = rng.token(8)
        used.add(token)
        playlist.append(
            PlaylistItem(
                clip_token=token,
                system_code=code,
                clip_id=clip.clip_id,
                caption=clip.caption,
            )
        )
    return Session(
        session_id=session_id, rater_id=rater_id, team_id=team_id, playlist=playlist
    )


class RatingLog:
    """Append-only JSON-lines store, flushed and fsynced per append."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = self.path.open("a", encoding="utf-8")
        self._lock = threading.Lock()

    def append(self, event: dict) -> None:
        line = json.dumps(event, separators=(",", ":"), sort_keys=True)
        with self._lock:
            self._fh.write(line + "\n")
            self._fh.flush()
            os.fsync(self._fh.fileno())

    def log_session(self, session: Session) -> None:
        """Persist a session's playlist; must precede its rating events."""
        self.append(
            {
                "type": "session",
                "session_id": session.session_id,
                "rater_id": session.rater_id,
                "team_id": session.team_id,
                "playlist": [
                    {
                        "clip_token": item.clip_token,
                        "system_code": item.system_code,
                        "clip_id": item.clip_id,
                        "caption": item.caption,
                    }
                    for item in session.playlist
                ],
            }
        )

    def close(self) -> None:
        self._fh.close()

    @staticmethod
    def replay(path: str | Path) -> tuple[dict[str, Session], list[RatingRecord]]:
        """Rebuild sessions and the rating sequence from a log file."""
        path = Path(path)
        sessions: dict[str, Session] = {}
        ratings: list[RatingRecord] = []
        if not path.exists():
            return sessions, ratings
        with path.open(encoding="utf-8") as fh:
            for line_num, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    event = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise LogCorrupt(f"{path}:{line_num}: {exc}") from exc
                kind = event.get("type")
                if kind == "session":
                    playlist = [
                        PlaylistItem(
                            clip_token=item["clip_token"],
                            system_code=item["system_code"],
                            clip_id=item["clip_id"],
                            caption=item["caption"],
                        )
                        for item in event["playlist"]
                    ]
                    session = Session(
                        session_id=event["session_id"],
                        rater_id=event["rater_id"],
                        team_id=event["team_id"],
                        playlist=playlist,
                    )
                    sessions[session.session_id] = session
                elif kind == "rating":
                    sid = event["session_id"]
                    session = sessions.get(sid)
                    if session is None:
                        raise LogCorrupt(f"{path}:{line_num}: rating for unknown session {sid}")
                    if session.completed or (
                        session.current.clip_token != event["clip_token"]
                    ):
                        raise LogCorrupt(
                            f"{path}:{line_num}: rating out of order for session {sid}"
                        )
                    session.cursor += 1
                    ratings.append(
                        RatingRecord(
                            rater_id=event["rater_id"],
                            team_id=event["team_id"],
                            system_code=event["system_code"],
                            clip_id=event["clip_id"],
                            ff=event["ff"],
                            bf=event["bf"],
                            aq=event["aq"],
                        )
                    )
                else:
                    raise LogCorrupt(f"{path}:{line_num}: unknown event type {kind!r}")
        return sessions, ratings


def submit_rating(
    session: Session,
    clip_token: str,
    ff: float,
    bf: float,
    aq: float,
    log: RatingLog,
) -> Session:
    """Record the rating for the session's current item and advance.

    The log append (flush + fsync) happens before the cursor moves, so an
    acknowledged rating is always on disk. Re-submitting an already rated
    token, or any token other than the current one, raises
    OutOfOrderToken; a finished session raises SessionComplete.
    """
    if session.completed:
        raise SessionComplete(f"session {session.session_id} is complete")
    ff = _check_score("ff", ff)
    bf = _check_score("bf", bf)
    aq = _check_score("aq", aq)
    current = session.playlist[session.cursor]
    if clip_token != current.clip_token:
        raise OutOfOrderToken(
            f"expected the current item's token, got {clip_token!r}"
        )
    log.append(
        {
            "type": "rating",
            "session_id": session.session_id,
            "clip_token": current.clip_token,
            "system_code": current.system_code,
            "clip_id": current.clip_id,
            "rater_id": session.rater_id,
            "team_id": session.team_id,
            "ff": ff,
            "bf": bf,
            "aq": aq,
        }
    )
    session.cursor += 1
    return session


def export_ratings(
    store: str | Path | Sequence[RatingRecord],
    system_teams: Mapping[str, str],
    reveal: bool = False,
    name_by_code: Mapping[str, str] | None = None,
) -> str:
    """Render the ratings CSV with self-ratings removed.

    ``store`` is a log path (replayed) or an already-loaded record
    sequence. With ``reveal`` the blinded codes are replaced by real
    system names; that flag is for organizers only and needs
    ``name_by_code``.
    """
    if isinstance(store, (str, Path)):
        _, records = RatingLog.replay(store)
    else:
        records = list(store)
    kept = filter_self_ratings(records, system_teams)
    if reveal:
        if name_by_code is None:
            raise UnknownSystemCode("reveal requested without a code-to-name map")
        unblinded = []
        for r in kept:
            if r.system_code not in name_by_code:
                raise UnknownSystemCode(f"no name for code {r.system_code!r}")
            unblinded.append(
                RatingRecord(
                    rater_id=r.rater_id,
                    team_id=r.team_id,
                    system_code=name_by_code[r.system_code],
                    clip_id=r.clip_id,
                    ff=r.ff,
                    bf=r.bf,
                    aq=r.aq,
                )
            )
        kept = unblinded
    buf = io.StringIO()
    _write_csv(kept, buf)
    return buf.getvalue()


def _write_csv(records: Iterable[RatingRecord], buf: io.StringIO) -> None:
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["rater_id", "team_id", "system_code", "clip_id", "ff", "bf", "aq"])
    for r in records:
        writer.writerow([r.rater_id, r.team_id, r.system_code, r.clip_id, r.ff, r.bf, r.aq])


@dataclass
class ServiceConfig:
    """Everything the running service needs.

    ``system_teams`` maps real system name to the submitting team id;
    audio for a system lives at audio_dir/<system name>/<clip_id>.wav.
    """

    clips: Sequence[ManifestEntry]
    system_teams: Mapping[str, str]
    audio_dir: Path
    seed: int
    organizer_token: str
    log_path: Path


class ListeningService:
    """Session registry plus persistence; safe for concurrent requests."""

    def __init__(self, config: ServiceConfig):
        if not config.clips:
            raise EmptyClipSet("service needs a non-empty clip set")
        self.config = config
        self._master = SplitMix64(config.seed)
        self.blind_map = blind_systems(sorted(config.system_teams), self._master.next_u64())
        self._name_by_code = self.blind_map.name_by_code
        self._lock = threading.RLock()
        self._sessions: dict[str, Session] = {}
        self._tokens: dict[str, PlaylistItem] = {}
        self._ratings: list[RatingRecord] = []
        resumed, ratings = RatingLog.replay(config.log_path)
        for session in resumed.values():
            self._index_session(session)
        self._ratings.extend(ratings)
        self._log = RatingLog(config.log_path)

    # -- configuration helpers -------------------------------------------

    def system_team_by_code(self) -> dict[str, str]:
        return {
            code: self.config.system_teams[name]
            for name, code in self.blind_map.code_by_name.items()
        }

    def audio_path(self, item: PlaylistItem) -> Path:
        name = self._name_by_code[item.system_code]
        return Path(self.config.audio_dir) / name / f"{item.clip_id}.wav"

    def check_audio_files(self) -> list[Path]:
        """Paths every playlist could reference; raises on missing files."""
        missing = []
        paths = []
        for name in self.blind_map.code_by_name:
            for clip in self.config.clips:
                path = Path(self.config.audio_dir) / name / f"{clip.clip_id}.wav"
                paths.append(path)
                if not path.is_file():
                    missing.append(path)
        if missing:
            raise FileNotFoundError(
                f"{len(missing)} audio files missing, first: {missing[0]}"
            )
        return paths

    def _index_session(self, session: Session) -> None:
        self._sessions[session.session_id] = session
        for item in session.playlist:
            self._tokens[item.clip_token] = item

    # -- rater-facing operations -----------------------------------------

    def open_session(self, rater_id: str, team_id: str) -> Session:
        with self._lock:
            while True:
                seed = self._master.next_u64()
                session = create_session(
                    rater_id, team_id, self.config.clips, self.blind_map, seed
                )
                fresh = session.session_id not in self._sessions and not any(
                    item.clip_token in self._tokens for item in session.playlist
                )
                if fresh:
                    break
            self._log.log_session(session)
            self._index_session(session)
            return session

    def get_session(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise UnknownSession(f"no session {session_id!r}")
        return session

    def rate(self, session_id: str, clip_token: str, ff: float, bf: float, aq: float) -> Session:
        with self._lock:
            session = self.get_session(session_id)
            current = session.current  # raises SessionComplete on a done session
            submit_rating(session, clip_token, ff, bf, aq, self._log)
            self._ratings.append(
                RatingRecord(
                    rater_id=session.rater_id,
                    team_id=session.team_id,
                    system_code=current.system_code,
                    clip_id=current.clip_id,
                    ff=float(ff),
                    bf=float(bf),
                    aq=float(aq),
                )
            )
            return session

    def audio_bytes(self, clip_token: str) -> bytes:
        with self._lock:
            item = self._tokens.get(clip_token)
        if item is None:
            raise UnknownToken(f"no clip for token {clip_token!r}")
        return self.audio_path(item).read_bytes()

    # -- organizer operations --------------------------------------------

    def export(self, reveal: bool = False) -> str:
        with self._lock:
            records = list(self._ratings)
        return export_ratings(
            records,
            self.system_team_by_code(),
            reveal=reveal,
            name_by_code=self._name_by_code,
        )

    def rating_count(self) -> int:
        with self._lock:
            return len(self._ratings)


def build_app(service: ListeningService, ui_dir: str | Path | None = None):
    """FastAPI app exposing the rater API plus the organizer export.

    Domain errors map to JSON bodies {"error": <type>, "message": ...}
    with 400 for bad scores, 404 for unknown ids, 409 for order and
    completion conflicts and 401 for a bad organizer token.
    """
    from fastapi import FastAPI, Header, Request
    from fastapi.responses import JSONResponse, PlainTextResponse, Response

    app = FastAPI(title="sceneval listening service", docs_url=None, redoc_url=None)

    def progress(session: Session) -> dict:
        return {"done": session.cursor, "total": len(session.playlist)}

    def error_response(status: int, exc: Exception) -> JSONResponse:
        return JSONResponse(
            status_code=status,
            content={"error": type(exc).__name__, "message": str(exc)},
        )

    @app.exception_handler(UnknownSession)
    @app.exception_handler(UnknownToken)
    async def _unknown(request: Request, exc: Exception):
        return error_response(404, exc)

    @app.exception_handler(ScoreOutOfRange)
    async def _bad_score(request: Request, exc: Exception):
        return error_response(400, exc)

    @app.exception_handler(OutOfOrderToken)
    @app.exception_handler(SessionComplete)
    async def _conflict(request: Request, exc: Exception):
        return error_response(409, exc)

    @app.post("/api/session")
    def open_session(body: SessionRequest):
        session = service.open_session(body.rater_id, body.team_id)
        return {
            "session_id": session.session_id,
            "completed": session.completed,
            "progress": progress(session),
        }

    @app.get("/api/session/{session_id}/next")
    def next_item(session_id: str):
        session = service.get_session(session_id)
        if session.completed:
            return {"completed": True, "progress": progress(session)}
        item = session.current
        return {
            "completed": False,
            "clip_token": item.clip_token,
            "audio_url": f"/api/audio/{item.clip_token}",
            "caption": item.caption,
            "progress": progress(session),
        }

    @app.get("/api/audio/{clip_token}")
    def audio(clip_token: str):
        data = service.audio_bytes(clip_token)
        return Response(content=data, media_type="audio/wav")

    @app.post("/api/session/{session_id}/rating")
    def rate(session_id: str, body: RatingRequest):
        session = service.rate(session_id, body.clip_token, body.ff, body.bf, body.aq)
        return {"ok": True, "completed": session.completed, "progress": progress(session)}

    @app.get("/api/admin/export")
    def export(
        reveal: bool = False,
        x_organizer_token: str | None = Header(default=None),
    ):
        if x_organizer_token != service.config.organizer_token:
            return JSONResponse(
                status_code=401,
                content={"error": "Unauthorized", "message": "bad organizer token"},
            )
        csv_text = service.export(reveal=reveal)
        return PlainTextResponse(csv_text, media_type="text/csv")

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
