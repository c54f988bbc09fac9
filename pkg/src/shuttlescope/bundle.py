"""The immutable, fully derived match record and its JSON form.

A MatchBundle is the analysis output for one match: games containing
rallies containing classified shots with their fitted trajectories, plus
precomputed summaries. Bundles are value data; every consumer (query
engine, HTTP service, CLI tables) reads them without mutation.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from .court import CameraModel, CourtSpec
from .flight import FitResult, FlightParams, NetCrossing, TrajectorySample
from .ingest import MatchManifest, PoseFrame
from .model import (
    CourtPoint,
    Diagnostic,
    GameHalf,
    GameSummary,
    MatchSummary,
    PlayerId,
    RallyRecord,
    RallySummary,
    ShotLabel,
    ShotRecord,
    Tendency,
    Zone,
)

SCHEMA = "shuttlescope.bundle.v1"
SHORT_RALLY_SHOTS = 10  # a short rally has strictly fewer shots than this


@dataclass(frozen=True)
class ShotAnalysis:
    record: ShotRecord
    label: ShotLabel = ShotLabel.NORMAL
    tendency: Tendency | None = None
    from_zone: Zone | None = None
    to_zone: Zone | None = None
    speed: float | None = None
    net_crossing: NetCrossing | None = None
    fit: FitResult | None = None
    trajectory: tuple[TrajectorySample, ...] | None = None

    @property
    def shot_id(self) -> str:
        return self.record.shot_id

    @property
    def hitter(self) -> PlayerId:
        return self.record.hitter


@dataclass(frozen=True)
class RallyAnalysis:
    record: RallyRecord
    game_index: int  # 1-based
    score_after: tuple[int, int]
    shots: tuple[ShotAnalysis, ...]
    poses: tuple[PoseFrame, ...] = ()
    degenerate: bool = False

    @property
    def rally_id(self) -> int:
        return self.record.rally_id

    @property
    def shot_count(self) -> int:
        return len(self.shots)

    @property
    def is_short(self) -> bool:
        return len(self.shots) < SHORT_RALLY_SHOTS


@dataclass(frozen=True)
class GameAnalysis:
    index: int  # 1-based
    score: tuple[int, int]
    winner: PlayerId | None
    finished: bool
    half_boundary: int | None  # number of rallies in the first half
    rallies: tuple[RallyAnalysis, ...]

    def half_of(self, rally: RallyAnalysis) -> GameHalf | None:
        """Which half of this game a rally belongs to (None before the
        midpoint exists)."""
        if self.half_boundary is None:
            return None
        pos = next((i for i, r in enumerate(self.rallies) if r.rally_id == rally.rally_id), None)
        if pos is None:
            return None
        return GameHalf.FIRST if pos < self.half_boundary else GameHalf.SECOND


@dataclass(frozen=True)
class Summaries:
    match: MatchSummary
    games: tuple[GameSummary, ...]
    halves: tuple[GameSummary, ...]
    rallies: tuple[RallySummary, ...]


@dataclass(frozen=True)
class MatchBundle:
    manifest: MatchManifest
    spec: CourtSpec
    camera: CameraModel | None
    games: tuple[GameAnalysis, ...]
    summaries: Summaries
    canonical: bool = False
    warnings: tuple[Diagnostic, ...] = ()

    def iter_rallies(self) -> Iterator[tuple[GameAnalysis, RallyAnalysis]]:
        for game in self.games:
            for rally in game.rallies:
                yield game, rally

    def iter_shots(self) -> Iterator[tuple[GameAnalysis, RallyAnalysis, ShotAnalysis]]:
        for game, rally in self.iter_rallies():
            for shot in rally.shots:
                yield game, rally, shot

    def find_rally(self, rally_id: int) -> tuple[GameAnalysis, RallyAnalysis] | None:
        for game, rally in self.iter_rallies():
            if rally.rally_id == rally_id:
                return game, rally
        return None

    def find_shot(self, shot_id: str) -> tuple[GameAnalysis, RallyAnalysis, ShotAnalysis] | None:
        for game, rally, shot in self.iter_shots():
            if shot.shot_id == shot_id:
                return game, rally, shot
        return None

    @property
    def rally_count(self) -> int:
        return sum(len(g.rallies) for g in self.games)


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

@dataclass
class ValidationReport:
    errors: list[Diagnostic]
    warnings: list[Diagnostic]

    @property
    def ok(self) -> bool:
        return not self.errors


def validate_bundle(bundle: MatchBundle) -> ValidationReport:
    """Check every structural invariant of a derived bundle.

    Violations are report entries naming the rally/shot, never raises.
    Warnings cover the soft conventions (server continuity, first-shot
    server); everything else is an error.
    """
    errors: list[Diagnostic] = []
    warnings: list[Diagnostic] = []

    def err(code: str, message: str, rally_id=None, shot_index=None):
        errors.append(Diagnostic(code, message, rally_id, shot_index))

    def warn(code: str, message: str, rally_id=None, shot_index=None):
        warnings.append(Diagnostic(code, message, rally_id, shot_index))

    if bundle.manifest.fps <= 0:
        err("BadFps", f"fps must be positive, got {bundle.manifest.fps}")

    prev_rally: RallyRecord | None = None
    for game, rally in bundle.iter_rallies():
        rec = rally.record
        if rec.start_frame >= rec.end_frame:
            err("NonMonotoneFrames", "rally start_frame >= end_frame", rec.rally_id)
        if prev_rally is not None:
            if rec.start_frame <= prev_rally.end_frame:
                err("OverlappingRallies", "rally overlaps its predecessor", rec.rally_id)
            if rec.server != prev_rally.winner:
                warn(
                    "ServerNotPrevWinner",
                    f"served by {rec.server.value}, previous rally won by "
                    f"{prev_rally.winner.value}",
                    rec.rally_id,
                )
        prev_rally = rec

        if not rally.shots:
            err("EmptyRally", "rally has no shots", rec.rally_id)
            continue
        if rally.shots[0].record.hitter != rec.server:
            warn("HitterNotServer", "first shot not hit by the annotated server", rec.rally_id, 0)
        for i, shot in enumerate(rally.shots):
            srec = shot.record
            if srec.shot_index != i:
                err("BadShotIndex", f"expected shot_index {i}, got {srec.shot_index}",
                    rec.rally_id, srec.shot_index)
            if not (rec.start_frame <= srec.hit_frame <= rec.end_frame):
                err("OrphanShot", "hit frame outside the rally's range",
                    rec.rally_id, srec.shot_index)
            if i > 0 and srec.hitter == rally.shots[i - 1].record.hitter:
                err("AlternationViolation", "consecutive shots by the same hitter",
                    rec.rally_id, srec.shot_index)
            if bundle.canonical and shot.from_zone is not None and shot.from_zone.half != srec.hitter:
                err("ZoneHalfMismatch",
                    f"from_zone half {shot.from_zone.half.value} != hitter {srec.hitter.value}",
                    rec.rally_id, srec.shot_index)
            if shot.fit is not None:
                p = shot.fit.params
                speed = float(np.hypot(np.hypot(p.v0[0], p.v0[1]), p.v0[2]))
                if not (0.3 <= p.p0.z <= 3.5) or speed > 120.0 or not (4.0 <= p.vT <= 12.0):
                    err("NonPhysicalParams", "fitted flight parameters outside plausible box",
                        rec.rally_id, srec.shot_index)

        labels = [s.label for s in rally.shots]
        n_win = labels.count(ShotLabel.WINNER)
        n_err = labels.count(ShotLabel.ERROR)
        if rally.degenerate:
            if n_win or n_err:
                err("LabelRule", "degenerate rally must label every shot Normal", rec.rally_id)
        elif n_win + n_err != 1:
            err("LabelRule",
                f"rally must carry exactly one Winner xor Error, got {n_win}W/{n_err}E",
                rec.rally_id)
        for shot in rally.shots:
            if shot.label is ShotLabel.WINNER and shot.record.hitter != rec.winner:
                err("LabelRule", "Winner shot not hit by the rally winner",
                    rec.rally_id, shot.record.shot_index)
            if shot.label is ShotLabel.ERROR and shot.record.hitter == rec.winner:
                err("LabelRule", "Error shot hit by the rally winner",
                    rec.rally_id, shot.record.shot_index)

    for game in bundle.games:
        score = [0, 0]
        for rally in game.rallies:
            score[0 if rally.record.winner is PlayerId.A else 1] += 1
            if tuple(score) != rally.score_after:
                err("ScoreMismatch",
                    f"running score {tuple(score)} != recorded {rally.score_after}",
                    rally.rally_id)
        if game.rallies and game.score != game.rallies[-1].score_after:
            err("ScoreMismatch", f"game {game.index} final score disagrees with last rally")

    if bundle.summaries.match.rally_count != bundle.rally_count:
        err("SummaryMismatch", "match summary rally count != rallies in bundle")

    return ValidationReport(errors=errors, warnings=warnings)


# ---------------------------------------------------------------------------
# JSON serialization
# ---------------------------------------------------------------------------

def _vec(v) -> list[float]:
    return [float(v[0]), float(v[1]), float(v[2])]


def _shot_to_json(shot: ShotAnalysis) -> dict:
    d: dict = {
        "shot_id": shot.shot_id,
        "shot_index": shot.record.shot_index,
        "hit_frame": shot.record.hit_frame,
        "hitter": shot.record.hitter.value,
        "label": shot.label.value,
        "tendency": shot.tendency.value if shot.tendency else None,
        "from_zone": shot.from_zone.code if shot.from_zone else None,
        "to_zone": shot.to_zone.code if shot.to_zone else None,
        "speed": shot.speed,
    }
    if shot.net_crossing is not None:
        d["net_crossing"] = {
            "t": shot.net_crossing.t,
            "p": _vec(shot.net_crossing.p),
            "v": _vec(shot.net_crossing.v),
        }
    else:
        d["net_crossing"] = None
    if shot.fit is not None:
        f = shot.fit
        d["fit"] = {
            "p0": _vec(f.params.p0),
            "v0": _vec(f.params.v0),
            "vt": f.params.vT,
            "t0": f.params.t0,
            "rmse_px": f.rmse_px,
            "n_obs": f.n_obs,
            "converged": f.converged,
        }
    else:
        d["fit"] = None
    if shot.trajectory is not None and len(shot.trajectory) >= 2:
        t0 = shot.trajectory[0].t
        dt = shot.trajectory[1].t - t0
        d["trajectory"] = {
            "t0": t0,
            "dt": dt,
            "p": [_vec(s.p) for s in shot.trajectory],
            "v": [_vec(s.v) for s in shot.trajectory],
        }
    else:
        d["trajectory"] = None
    return d


def _shot_from_json(rally_id: int, d: dict) -> ShotAnalysis:
    record = ShotRecord(
        rally_id=rally_id,
        shot_index=d["shot_index"],
        hit_frame=d["hit_frame"],
        hitter=PlayerId.parse(d["hitter"]),
    )
    nc = None
    if d.get("net_crossing"):
        j = d["net_crossing"]
        nc = NetCrossing(j["t"], CourtPoint(*j["p"]), tuple(j["v"]))
    fit = None
    if d.get("fit"):
        j = d["fit"]
        fit = FitResult(
            params=FlightParams(
                p0=CourtPoint(*j["p0"]), v0=tuple(j["v0"]), vT=j["vt"], t0=j["t0"]
            ),
            rmse_px=j["rmse_px"],
            n_obs=j["n_obs"],
            converged=j["converged"],
        )
    traj = None
    if d.get("trajectory"):
        j = d["trajectory"]
        traj = tuple(
            TrajectorySample(j["t0"] + k * j["dt"], CourtPoint(*p), tuple(v))
            for k, (p, v) in enumerate(zip(j["p"], j["v"]))
        )
    return ShotAnalysis(
        record=record,
        label=ShotLabel(d["label"]),
        tendency=Tendency(d["tendency"]) if d.get("tendency") else None,
        from_zone=Zone.parse(d["from_zone"]) if d.get("from_zone") else None,
        to_zone=Zone.parse(d["to_zone"]) if d.get("to_zone") else None,
        speed=d.get("speed"),
        net_crossing=nc,
        fit=fit,
        trajectory=traj,
    )


def _pose_to_json(pf: PoseFrame) -> dict:
    return {
        "frame": pf.frame,
        "A": list(pf.a) if pf.a is not None else None,
        "B": list(pf.b) if pf.b is not None else None,
        "A_joints": [_vec(j) for j in pf.a_joints] if pf.a_joints else None,
        "B_joints": [_vec(j) for j in pf.b_joints] if pf.b_joints else None,
    }


def _pose_from_json(d: dict) -> PoseFrame:
    return PoseFrame(
        frame=d["frame"],
        a=tuple(d["A"]) if d.get("A") else None,
        b=tuple(d["B"]) if d.get("B") else None,
        a_joints=tuple(CourtPoint(*j) for j in d["A_joints"]) if d.get("A_joints") else None,
        b_joints=tuple(CourtPoint(*j) for j in d["B_joints"]) if d.get("B_joints") else None,
    )


def _match_summary_to_json(s: MatchSummary) -> dict:
    return {
        "duration_sec": s.duration_sec,
        "rally_count": s.rally_count,
        "total_shots": s.total_shots,
        "avg_shots_per_rally": s.avg_shots_per_rally,
        "rallies_won": {"A": s.rallies_won_a, "B": s.rallies_won_b},
        "winner": s.winner.value if s.winner else None,
        "game_scores": [list(g) for g in s.game_scores],
        "empty": s.empty,
    }


def _game_summary_to_json(s: GameSummary) -> dict:
    return {
        "game_index": s.game_index,
        "half": s.half.value if s.half else None,
        "duration_sec": s.duration_sec,
        "rally_count": s.rally_count,
        "total_shots": s.total_shots,
        "avg_shots_per_rally": s.avg_shots_per_rally,
        "rallies_won": {"A": s.rallies_won_a, "B": s.rallies_won_b},
        "score": list(s.score),
        "winner": s.winner.value if s.winner else None,
        "empty": s.empty,
    }


def _match_summary_from_json(d: dict) -> MatchSummary:
    return MatchSummary(
        duration_sec=d["duration_sec"],
        rally_count=d["rally_count"],
        total_shots=d["total_shots"],
        avg_shots_per_rally=d["avg_shots_per_rally"],
        rallies_won_a=d["rallies_won"]["A"],
        rallies_won_b=d["rallies_won"]["B"],
        winner=PlayerId.parse(d["winner"]) if d.get("winner") else None,
        game_scores=tuple((g[0], g[1]) for g in d["game_scores"]),
        empty=d.get("empty", False),
    )


def _game_summary_from_json(d: dict) -> GameSummary:
    return GameSummary(
        game_index=d["game_index"],
        half=GameHalf(d["half"]) if d.get("half") else None,
        duration_sec=d["duration_sec"],
        rally_count=d["rally_count"],
        total_shots=d["total_shots"],
        avg_shots_per_rally=d["avg_shots_per_rally"],
        rallies_won_a=d["rallies_won"]["A"],
        rallies_won_b=d["rallies_won"]["B"],
        score=(d["score"][0], d["score"][1]),
        winner=PlayerId.parse(d["winner"]) if d.get("winner") else None,
        empty=d.get("empty", False),
    )


def bundle_to_json(bundle: MatchBundle) -> dict:
    m = bundle.manifest
    manifest: dict = {
        "video_uri": m.video_uri,
        "fps": m.fps,
        "players": {"A": m.player_a, "B": m.player_b},
        "event": m.event,
        "round": m.round,
        "start_negative_y": m.start_negative_y.value if m.start_negative_y else None,
    }
    camera = None
    if bundle.camera is not None:
        camera = {
            "projection": [float(x) for x in bundle.camera.P.ravel()],
            "image_size": list(bundle.camera.image_size),
            "rmse_px": bundle.camera.rmse_px,
        }
    games = []
    for game in bundle.games:
        games.append(
            {
                "index": game.index,
                "score": list(game.score),
                "winner": game.winner.value if game.winner else None,
                "finished": game.finished,
                "half_boundary": game.half_boundary,
                "rallies": [
                    {
                        "rally_id": rally.rally_id,
                        "start_frame": rally.record.start_frame,
                        "end_frame": rally.record.end_frame,
                        "server": rally.record.server.value,
                        "winner": rally.record.winner.value,
                        "score_after": list(rally.score_after),
                        "degenerate": rally.degenerate,
                        "shots": [_shot_to_json(s) for s in rally.shots],
                        "poses": [_pose_to_json(p) for p in rally.poses],
                    }
                    for rally in game.rallies
                ],
            }
        )
    s = bundle.summaries
    return {
        "schema": SCHEMA,
        "manifest": manifest,
        "court": {
            "length": bundle.spec.length,
            "width": bundle.spec.width,
            "net_height_center": bundle.spec.net_height_center,
            "net_height_post": bundle.spec.net_height_post,
            "zone_bounds": list(bundle.spec.zone_bounds),
        },
        "camera": camera,
        "canonical": bundle.canonical,
        "games": games,
        "summaries": {
            "match": _match_summary_to_json(s.match),
            "games": [_game_summary_to_json(g) for g in s.games],
            "halves": [_game_summary_to_json(g) for g in s.halves],
            "rallies": [
                {
                    "rally_id": r.rally_id,
                    "duration_sec": r.duration_sec,
                    "shot_count": r.shot_count,
                    "is_short": r.is_short,
                    "score_after": list(r.score_after),
                }
                for r in s.rallies
            ],
        },
        "warnings": [
            {
                "code": w.code,
                "message": w.message,
                "rally_id": w.rally_id,
                "shot_index": w.shot_index,
            }
            for w in bundle.warnings
        ],
    }


def bundle_from_json(data: dict) -> MatchBundle:
    if data.get("schema") != SCHEMA:
        raise ValueError(f"unknown bundle schema {data.get('schema')!r}")
    mj = data["manifest"]
    manifest = MatchManifest(
        video_uri=mj["video_uri"],
        fps=mj["fps"],
        player_a=mj["players"]["A"],
        player_b=mj["players"]["B"],
        event=mj.get("event"),
        round=mj.get("round"),
        start_negative_y=PlayerId.parse(mj["start_negative_y"])
        if mj.get("start_negative_y")
        else None,
    )
    cj = data["court"]
    spec = CourtSpec(
        length=cj["length"],
        width=cj["width"],
        net_height_center=cj["net_height_center"],
        net_height_post=cj["net_height_post"],
        zone_bounds=(cj["zone_bounds"][0], cj["zone_bounds"][1]),
    )
    camera = None
    if data.get("camera"):
        kj = data["camera"]
        camera = CameraModel(
            np.array(kj["projection"]).reshape(3, 4),
            (kj["image_size"][0], kj["image_size"][1]),
            rmse_px=kj["rmse_px"],
        )
    games = []
    for gj in data["games"]:
        rallies = []
        for rj in gj["rallies"]:
            record = RallyRecord(
                rally_id=rj["rally_id"],
                start_frame=rj["start_frame"],
                end_frame=rj["end_frame"],
                server=PlayerId.parse(rj["server"]),
                winner=PlayerId.parse(rj["winner"]),
            )
            rallies.append(
                RallyAnalysis(
                    record=record,
                    game_index=gj["index"],
                    score_after=(rj["score_after"][0], rj["score_after"][1]),
                    shots=tuple(_shot_from_json(rj["rally_id"], sj) for sj in rj["shots"]),
                    poses=tuple(_pose_from_json(pj) for pj in rj.get("poses", [])),
                    degenerate=rj["degenerate"],
                )
            )
        games.append(
            GameAnalysis(
                index=gj["index"],
                score=(gj["score"][0], gj["score"][1]),
                winner=PlayerId.parse(gj["winner"]) if gj.get("winner") else None,
                finished=gj["finished"],
                half_boundary=gj.get("half_boundary"),
                rallies=tuple(rallies),
            )
        )
    sj = data["summaries"]
    summaries = Summaries(
        match=_match_summary_from_json(sj["match"]),
        games=tuple(_game_summary_from_json(g) for g in sj["games"]),
        halves=tuple(_game_summary_from_json(g) for g in sj["halves"]),
        rallies=tuple(
            RallySummary(
                rally_id=r["rally_id"],
                duration_sec=r["duration_sec"],
                shot_count=r["shot_count"],
                is_short=r["is_short"],
                score_after=(r["score_after"][0], r["score_after"][1]),
            )
            for r in sj["rallies"]
        ),
    )
    warnings = tuple(
        Diagnostic(w["code"], w["message"], w.get("rally_id"), w.get("shot_index"))
        for w in data.get("warnings", [])
    )
    return MatchBundle(
        manifest=manifest,
        spec=spec,
        camera=camera,
        games=tuple(games),
        summaries=summaries,
        canonical=data["canonical"],
        warnings=warnings,
    )


def save_bundle(bundle: MatchBundle, path: str | Path) -> None:
    text = json.dumps(bundle_to_json(bundle), sort_keys=True, separators=(",", ":"))
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_bundle(path: str | Path) -> MatchBundle:
    return bundle_from_json(json.loads(Path(path).read_text(encoding="utf-8")))
