"""Pydantic request/response models for the HTTP API.

These mirror the core dataclasses field-for-field so API responses are
exactly the in-process query results; the converters are the only place
that knows both shapes.
"""
from __future__ import annotations

from pydantic import BaseModel

from ..bundle import GameAnalysis, MatchBundle, RallyAnalysis, ShotAnalysis
from ..model import HeatmapCell
from ..query import RallyMenuItem, ShotContext


class ErrorBody(BaseModel):
    detail: str


class MatchListItem(BaseModel):
    match_id: str
    players: dict[str, str]
    event: str | None
    round: str | None
    game_scores: list[list[int]]
    winner: str | None
    rally_count: int
    duration_sec: float
    video: str | None


class SummaryOut(BaseModel):
    scope: str  # "match" or "game"
    game_index: int | None = None
    half: str | None = None
    duration_sec: float
    rally_count: int
    total_shots: int
    avg_shots_per_rally: float
    rallies_won: dict[str, int]
    winner: str | None
    score: list[int] | None = None
    game_scores: list[list[int]] | None = None
    halves_available: list[int] | None = None
    empty: bool


class NetCrossingOut(BaseModel):
    t: float
    p: list[float]
    v: list[float]


class FitOut(BaseModel):
    p0: list[float]
    v0: list[float]
    vt: float
    t0: float
    rmse_px: float
    n_obs: int
    converged: bool


class TrajectoryOut(BaseModel):
    t0: float
    dt: float
    p: list[list[float]]
    v: list[list[float]]


class ShotOut(BaseModel):
    shot_id: str
    rally_id: int
    shot_index: int
    hit_frame: int
    hitter: str
    label: str
    tendency: str | None
    from_zone: str | None
    to_zone: str | None
    speed: float | None
    net_crossing: NetCrossingOut | None
    fit: FitOut | None
    trajectory: TrajectoryOut | None


class ShotsOut(BaseModel):
    count: int
    shots: list[ShotOut]


class RallyMenuItemOut(BaseModel):
    rally_id: int
    game_index: int
    score_after: list[int]
    shot_count: int
    is_short: bool
    winner: str
    duration_sec: float
    matched_shot_ids: list[str]


class PoseFrameOut(BaseModel):
    frame: int
    A: list[float] | None
    B: list[float] | None


class RallyDetailOut(BaseModel):
    rally_id: int
    game_index: int
    half: str | None
    start_frame: int
    end_frame: int
    start_sec: float
    end_sec: float
    server: str
    winner: str
    score_after: list[int]
    degenerate: bool
    shots: list[ShotOut]
    poses: list[PoseFrameOut]


class HeatmapCellOut(BaseModel):
    zone: str
    direction: str
    count: int
    fraction: float
    display_percent: int


class HeatmapOut(BaseModel):
    direction: str
    total: int
    cells: list[HeatmapCellOut]


class ShotContextOut(BaseModel):
    shot_id: str
    rally_id: int
    game_index: int
    clip_start_sec: float
    clip_end_sec: float
    hit_sec: float
    trajectory: TrajectoryOut | None
    prev_shot_id: str | None
    next_shot_id: str | None


# ---------------------------------------------------------------------------
# converters
# ---------------------------------------------------------------------------

def shot_out(rally: RallyAnalysis, shot: ShotAnalysis) -> ShotOut:
    nc = None
    if shot.net_crossing is not None:
        nc = NetCrossingOut(
            t=float(shot.net_crossing.t),
            p=[float(c) for c in shot.net_crossing.p],
            v=[float(c) for c in shot.net_crossing.v],
        )
    fit = None
    if shot.fit is not None:
        f = shot.fit
        fit = FitOut(
            p0=[float(c) for c in f.params.p0],
            v0=[float(c) for c in f.params.v0],
            vt=float(f.params.vT),
            t0=float(f.params.t0),
            rmse_px=float(f.rmse_px),
            n_obs=f.n_obs,
            converged=f.converged,
        )
    traj = trajectory_out(shot)
    return ShotOut(
        shot_id=shot.shot_id,
        rally_id=rally.rally_id,
        shot_index=shot.record.shot_index,
        hit_frame=shot.record.hit_frame,
        hitter=shot.record.hitter.value,
        label=shot.label.value,
        tendency=shot.tendency.value if shot.tendency else None,
        from_zone=shot.from_zone.code if shot.from_zone else None,
        to_zone=shot.to_zone.code if shot.to_zone else None,
        speed=float(shot.speed) if shot.speed is not None else None,
        net_crossing=nc,
        fit=fit,
        trajectory=traj,
    )


def trajectory_out(shot: ShotAnalysis) -> TrajectoryOut | None:
    if shot.trajectory is None or len(shot.trajectory) < 2:
        return None
    t0 = float(shot.trajectory[0].t)
    dt = float(shot.trajectory[1].t) - t0
    return TrajectoryOut(
        t0=t0,
        dt=dt,
        p=[[float(c) for c in s.p] for s in shot.trajectory],
        v=[[float(c) for c in s.v] for s in shot.trajectory],
    )


def menu_item_out(item: RallyMenuItem) -> RallyMenuItemOut:
    return RallyMenuItemOut(
        rally_id=item.rally_id,
        game_index=item.game_index,
        score_after=list(item.score_after),
        shot_count=item.shot_count,
        is_short=item.is_short,
        winner=item.winner.value,
        duration_sec=float(item.duration_sec),
        matched_shot_ids=list(item.matched_shot_ids),
    )


def rally_detail_out(
    bundle: MatchBundle, game: GameAnalysis, rally: RallyAnalysis
) -> RallyDetailOut:
    fps = bundle.manifest.fps
    half = game.half_of(rally)
    return RallyDetailOut(
        rally_id=rally.rally_id,
        game_index=game.index,
        half=half.value if half else None,
        start_frame=rally.record.start_frame,
        end_frame=rally.record.end_frame,
        start_sec=rally.record.start_frame / fps,
        end_sec=rally.record.end_frame / fps,
        server=rally.record.server.value,
        winner=rally.record.winner.value,
        score_after=list(rally.score_after),
        degenerate=rally.degenerate,
        shots=[shot_out(rally, s) for s in rally.shots],
        poses=[
            PoseFrameOut(
                frame=p.frame,
                A=[float(c) for c in p.a] if p.a else None,
                B=[float(c) for c in p.b] if p.b else None,
            )
            for p in rally.poses
        ],
    )


def heatmap_cell_out(cell: HeatmapCell) -> HeatmapCellOut:
    return HeatmapCellOut(
        zone=cell.zone.code,
        direction=cell.direction.value,
        count=cell.count,
        fraction=float(cell.fraction),
        display_percent=cell.display_percent,
    )


def context_out(ctx: ShotContext) -> ShotContextOut:
    traj = None
    if ctx.trajectory is not None and len(ctx.trajectory) >= 2:
        t0 = float(ctx.trajectory[0].t)
        dt = float(ctx.trajectory[1].t) - t0
        traj = TrajectoryOut(
            t0=t0,
            dt=dt,
            p=[[float(c) for c in s.p] for s in ctx.trajectory],
            v=[[float(c) for c in s.v] for s in ctx.trajectory],
        )
    return ShotContextOut(
        shot_id=ctx.shot_id,
        rally_id=ctx.rally_id,
        game_index=ctx.game_index,
        clip_start_sec=float(ctx.clip_start_sec),
        clip_end_sec=float(ctx.clip_end_sec),
        hit_sec=float(ctx.hit_sec),
        trajectory=traj,
        prev_shot_id=ctx.prev_shot_id,
        next_shot_id=ctx.next_shot_id,
    )
