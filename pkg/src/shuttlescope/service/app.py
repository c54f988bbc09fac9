"""Stateless read-only HTTP API over analyzed match bundles.

Bundles load once at startup and never change; every handler is a pure
read, so identical requests produce identical bodies and concurrency is
unbounded. Also hosts the viewer's static files and serves match video
with byte-range support so a <video> element can seek to clip times.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import Response, StreamingResponse
from fastapi.staticfiles import StaticFiles

from ..bundle import MatchBundle, load_bundle
from ..errors import InvalidFilter, UnknownRally, UnknownShot
from ..model import GameHalf, HeatDirection, PlayerId, Zone
from ..query import ShotFilter, filter_shots, get_rally, rally_menu, shot_context
from ..stats import heatmap, summarize_game, summarize_match
from . import schemas


@dataclass
class ServiceConfig:
    data_dir: Path
    video_dir: Path | None = None
    static_dir: Path | None = None
    pre_roll_sec: float = 0.5
    post_roll_sec: float = 0.5


def load_bundles(data_dir: Path) -> dict[str, MatchBundle]:
    bundles = {}
    for path in sorted(Path(data_dir).glob("*.json")):
        if path.name == "truth.json":
            continue
        bundles[path.stem] = load_bundle(path)
    if not bundles:
        raise FileNotFoundError(f"no bundle .json files found in {data_dir}")
    return bundles


def _parse_player(tag: str | None, name: str) -> PlayerId | None:
    if tag is None:
        return None
    try:
        return PlayerId.parse(tag)
    except ValueError:
        raise HTTPException(422, f"{name} must be 'A' or 'B', got {tag!r}") from None


def _parse_half(half: str | None) -> GameHalf | None:
    if half is None:
        return None
    try:
        return GameHalf(half)
    except ValueError:
        raise HTTPException(422, f"half must be 'first' or 'second', got {half!r}") from None


def _parse_zones(codes: list[str] | None, name: str) -> frozenset[Zone] | None:
    if not codes:
        return None
    try:
        return frozenset(Zone.parse(c) for c in codes)
    except ValueError as exc:
        raise HTTPException(422, f"bad {name}: {exc}") from None


def create_app(config: ServiceConfig) -> FastAPI:
    bundles = load_bundles(config.data_dir)

    app = FastAPI(title="shuttlescope", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def bundle_of(match_id: str) -> MatchBundle:
        bundle = bundles.get(match_id)
        if bundle is None:
            raise HTTPException(404, f"unknown match {match_id!r}")
        return bundle

    def filter_from_query(
        game: int | None,
        half: str | None,
        scorer: str | None,
        role: str,
        hitter: str | None,
        from_zone: list[str] | None,
        to_zone: list[str] | None,
    ) -> ShotFilter:
        f = ShotFilter(
            game=game,
            half=_parse_half(half),
            scorer=_parse_player(scorer, "scorer"),
            role=role,
            hitter=_parse_player(hitter, "hitter"),
            from_zones=_parse_zones(from_zone, "from_zone"),
            to_zones=_parse_zones(to_zone, "to_zone"),
        )
        try:
            f.validate()
        except InvalidFilter as exc:
            raise HTTPException(422, str(exc)) from None
        return f

    @app.get("/api/matches", response_model=list[schemas.MatchListItem])
    def list_matches():
        items = []
        for match_id, bundle in bundles.items():
            s = bundle.summaries.match
            items.append(
                schemas.MatchListItem(
                    match_id=match_id,
                    players={"A": bundle.manifest.player_a, "B": bundle.manifest.player_b},
                    event=bundle.manifest.event,
                    round=bundle.manifest.round,
                    game_scores=[list(g) for g in s.game_scores],
                    winner=s.winner.value if s.winner else None,
                    rally_count=s.rally_count,
                    duration_sec=s.duration_sec,
                    video=f"/video/{match_id}",
                )
            )
        return items

    @app.get(
        "/api/matches/{match_id}/summary",
        response_model=schemas.SummaryOut,
        response_model_exclude_none=False,
    )
    def get_summary(match_id: str, game: int | None = None, half: str | None = None):
        bundle = bundle_of(match_id)
        half_val = _parse_half(half)
        if half_val is not None and game is None:
            raise HTTPException(422, "half requires a game to be selected")
        halves_available = [g.index for g in bundle.games if g.half_boundary is not None]
        if game is None:
            s = summarize_match(bundle)
            return schemas.SummaryOut(
                scope="match",
                duration_sec=s.duration_sec,
                rally_count=s.rally_count,
                total_shots=s.total_shots,
                avg_shots_per_rally=s.avg_shots_per_rally,
                rallies_won={"A": s.rallies_won_a, "B": s.rallies_won_b},
                winner=s.winner.value if s.winner else None,
                game_scores=[list(g) for g in s.game_scores],
                halves_available=halves_available,
                empty=s.empty,
            )
        s = summarize_game(bundle, game, half_val)
        return schemas.SummaryOut(
            scope="game",
            game_index=game,
            half=half_val.value if half_val else None,
            duration_sec=s.duration_sec,
            rally_count=s.rally_count,
            total_shots=s.total_shots,
            avg_shots_per_rally=s.avg_shots_per_rally,
            rallies_won={"A": s.rallies_won_a, "B": s.rallies_won_b},
            winner=s.winner.value if s.winner else None,
            score=list(s.score),
            halves_available=halves_available,
            empty=s.empty,
        )

    @app.get("/api/matches/{match_id}/rallies", response_model=list[schemas.RallyMenuItemOut])
    def get_rally_menu(
        match_id: str,
        game: int | None = None,
        half: str | None = None,
        scorer: str | None = None,
        role: str = "all",
        hitter: str | None = None,
        from_zone: list[str] | None = Query(default=None),
        to_zone: list[str] | None = Query(default=None),
    ):
        bundle = bundle_of(match_id)
        f = filter_from_query(game, half, scorer, role, hitter, from_zone, to_zone)
        return [schemas.menu_item_out(item) for item in rally_menu(bundle, f)]

    @app.get("/api/matches/{match_id}/rallies/{rally_id}", response_model=schemas.RallyDetailOut)
    def get_rally_detail(match_id: str, rally_id: int):
        bundle = bundle_of(match_id)
        try:
            game, rally = get_rally(bundle, rally_id)
        except UnknownRally as exc:
            raise HTTPException(404, str(exc)) from None
        return schemas.rally_detail_out(bundle, game, rally)

    @app.get("/api/matches/{match_id}/shots", response_model=schemas.ShotsOut)
    def get_shots(
        match_id: str,
        game: int | None = None,
        half: str | None = None,
        scorer: str | None = None,
        role: str = "all",
        hitter: str | None = None,
        from_zone: list[str] | None = Query(default=None),
        to_zone: list[str] | None = Query(default=None),
    ):
        bundle = bundle_of(match_id)
        f = filter_from_query(game, half, scorer, role, hitter, from_zone, to_zone)
        shots = filter_shots(bundle, f)
        rally_of = {}
        for g, rally in bundle.iter_rallies():
            for s in rally.shots:
                rally_of[s.shot_id] = rally
        out = [schemas.shot_out(rally_of[s.shot_id], s) for s in shots]
        return schemas.ShotsOut(count=len(out), shots=out)

    @app.get("/api/matches/{match_id}/heatmap", response_model=schemas.HeatmapOut)
    def get_heatmap(
        match_id: str,
        direction: str,
        game: int | None = None,
        half: str | None = None,
        scorer: str | None = None,
        role: str = "all",
        hitter: str | None = None,
        from_zone: list[str] | None = Query(default=None),
        to_zone: list[str] | None = Query(default=None),
    ):
        bundle = bundle_of(match_id)
        try:
            dir_val = HeatDirection(direction)
        except ValueError:
            raise HTTPException(422, "direction must be 'from' or 'to'") from None
        f = filter_from_query(game, half, scorer, role, hitter, from_zone, to_zone)
        shots = filter_shots(bundle, f)
        cells = heatmap(shots, dir_val)
        return schemas.HeatmapOut(
            direction=dir_val.value,
            total=sum(c.count for c in cells),
            cells=[schemas.heatmap_cell_out(c) for c in cells],
        )

    @app.get(
        "/api/matches/{match_id}/shots/{shot_id}/context",
        response_model=schemas.ShotContextOut,
    )
    def get_shot_context(match_id: str, shot_id: str):
        bundle = bundle_of(match_id)
        try:
            ctx = shot_context(bundle, shot_id, config.pre_roll_sec, config.post_roll_sec)
        except UnknownShot as exc:
            raise HTTPException(404, str(exc)) from None
        return schemas.context_out(ctx)

    @app.get("/video/{match_id}")
    def get_video(match_id: str, request: Request):
        bundle = bundle_of(match_id)
        if config.video_dir is None:
            raise HTTPException(404, "no video directory configured")
        name = os.path.basename(bundle.manifest.video_uri)
        path = Path(config.video_dir) / name
        if not path.is_file():
            raise HTTPException(404, f"video file {name!r} not found")
        return _range_response(path, request.headers.get("range"))

    if config.static_dir is not None and Path(config.static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(config.static_dir), html=True), name="viewer")

    return app


_CHUNK = 64 * 1024


def _range_response(path: Path, range_header: str | None) -> Response:
    size = path.stat().st_size
    media_type = "video/mp4" if path.suffix.lower() in (".mp4", ".m4v") else "application/octet-stream"

    start, end = 0, size - 1
    status = 200
    if range_header:
        try:
            unit, _, spec = range_header.partition("=")
            if unit.strip().lower() != "bytes":
                raise ValueError
            lo, _, hi = spec.partition("-")
            if lo:
                start = int(lo)
                end = int(hi) if hi else size - 1
            else:
                start = max(size - int(hi), 0)
                end = size - 1
        except (ValueError, TypeError):
            raise HTTPException(416, "malformed Range header") from None
        if start >= size or start > end:
            return Response(
                status_code=416, headers={"Content-Range": f"bytes */{size}"}
            )
        end = min(end, size - 1)
        status = 206

    length = end - start + 1

    def stream():
        with open(path, "rb") as fh:
            fh.seek(start)
            remaining = length
            while remaining > 0:
                chunk = fh.read(min(_CHUNK, remaining))
                if not chunk:
                    break
                remaining -= len(chunk)
                yield chunk

    headers = {
        "Accept-Ranges": "bytes",
        "Content-Length": str(length),
    }
    if status == 206:
        headers["Content-Range"] = f"bytes {start}-{end}/{size}"
    return StreamingResponse(stream(), status_code=status, headers=headers, media_type=media_type)


__all__ = ["ServiceConfig", "create_app", "load_bundles"]
