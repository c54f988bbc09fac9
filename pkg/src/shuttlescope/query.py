"""Composable filters over a MatchBundle: the shot filter, the rally menu,
and per-shot game context.

Filters are pure conjunctions. Every set field must hold for a shot to
match: scope fields (game, half, scorer) restrict the rally, attribute
fields (role, hitter, zones) restrict the shot itself.
"""
from __future__ import annotations

from dataclasses import dataclass
from .bundle import GameAnalysis, MatchBundle, RallyAnalysis, ShotAnalysis
from .errors import InvalidFilter, UnknownRally, UnknownShot
from .flight import TrajectorySample
from .model import GameHalf, PlayerId, ShotLabel, Zone, parse_shot_id

DEFAULT_PRE_ROLL_SEC = 0.5
DEFAULT_POST_ROLL_SEC = 0.5


class ShotRole:
    ALL = "all"
    WINNERS = "winners"
    ERRORS = "errors"


@dataclass(frozen=True)
class ShotFilter:
    game: int | None = None
    half: GameHalf | None = None
    scorer: PlayerId | None = None
    role: str = ShotRole.ALL
    hitter: PlayerId | None = None
    from_zones: frozenset[Zone] | None = None
    to_zones: frozenset[Zone] | None = None

    def validate(self) -> None:
        if self.half is not None and self.game is None:
            raise InvalidFilter("half requires a game to be selected")
        if self.role not in (ShotRole.ALL, ShotRole.WINNERS, ShotRole.ERRORS):
            raise InvalidFilter(f"unknown role {self.role!r}")


def _rally_in_scope(
    game: GameAnalysis, rally: RallyAnalysis, pos: int, f: ShotFilter
) -> bool:
    if f.game is not None and game.index != f.game:
        return False
    if f.half is not None:
        boundary = game.half_boundary
        if boundary is None:
            # no midpoint yet: the whole game is its first half
            if f.half is GameHalf.SECOND:
                return False
        elif f.half is GameHalf.FIRST:
            if pos >= boundary:
                return False
        elif pos < boundary:
            return False
    if f.scorer is not None and rally.record.winner != f.scorer:
        return False
    return True


def _shot_matches(shot: ShotAnalysis, f: ShotFilter) -> bool:
    if f.role == ShotRole.WINNERS and shot.label is not ShotLabel.WINNER:
        return False
    if f.role == ShotRole.ERRORS and shot.label is not ShotLabel.ERROR:
        return False
    if f.hitter is not None and shot.record.hitter != f.hitter:
        return False
    if f.from_zones is not None and shot.from_zone not in f.from_zones:
        return False
    if f.to_zones is not None and shot.to_zone not in f.to_zones:
        return False
    return True


def filter_shots(bundle: MatchBundle, f: ShotFilter = ShotFilter()) -> list[ShotAnalysis]:
    f.validate()
    out = []
    for game in bundle.games:
        for pos, rally in enumerate(game.rallies):
            if not _rally_in_scope(game, rally, pos, f):
                continue
            out.extend(shot for shot in rally.shots if _shot_matches(shot, f))
    return out


@dataclass(frozen=True)
class RallyMenuItem:
    rally_id: int
    game_index: int
    score_after: tuple[int, int]
    shot_count: int
    is_short: bool
    winner: PlayerId
    duration_sec: float
    matched_shot_ids: tuple[str, ...]


def rally_menu(bundle: MatchBundle, f: ShotFilter = ShotFilter()) -> list[RallyMenuItem]:
    """One menu item per rally with at least one matching shot, in rally order."""
    f.validate()
    fps = bundle.manifest.fps
    items = []
    for game in bundle.games:
        for pos, rally in enumerate(game.rallies):
            if not _rally_in_scope(game, rally, pos, f):
                continue
            matched = [s.shot_id for s in rally.shots if _shot_matches(s, f)]
            if not matched:
                continue
            items.append(
                RallyMenuItem(
                    rally_id=rally.rally_id,
                    game_index=game.index,
                    score_after=rally.score_after,
                    shot_count=rally.shot_count,
                    is_short=rally.is_short,
                    winner=rally.record.winner,
                    duration_sec=(rally.record.end_frame - rally.record.start_frame) / fps,
                    matched_shot_ids=tuple(matched),
                )
            )
    items.sort(key=lambda it: it.rally_id)
    return items


@dataclass(frozen=True)
class ShotContext:
    shot_id: str
    rally_id: int
    game_index: int
    clip_start_sec: float
    clip_end_sec: float
    hit_sec: float
    trajectory: tuple[TrajectorySample, ...] | None
    prev_shot_id: str | None
    next_shot_id: str | None


def shot_context(
    bundle: MatchBundle,
    shot_id: str,
    pre_roll: float = DEFAULT_PRE_ROLL_SEC,
    post_roll: float = DEFAULT_POST_ROLL_SEC,
) -> ShotContext:
    """Video clip bounds and trajectory for one shot.

    The clip runs from `pre_roll` before the hit to `post_roll` after the
    next hit (or rally end), clamped to the rally's frame range.
    """
    try:
        parse_shot_id(shot_id)
    except ValueError:
        raise UnknownShot(shot_id) from None
    found = bundle.find_shot(shot_id)
    if found is None:
        raise UnknownShot(shot_id)
    game, rally, shot = found

    fps = bundle.manifest.fps
    idx = shot.record.shot_index
    hit_t = shot.record.hit_frame / fps
    if idx + 1 < len(rally.shots):
        next_t = rally.shots[idx + 1].record.hit_frame / fps
    else:
        next_t = rally.record.end_frame / fps
    rally_start_t = rally.record.start_frame / fps
    rally_end_t = rally.record.end_frame / fps

    return ShotContext(
        shot_id=shot_id,
        rally_id=rally.rally_id,
        game_index=game.index,
        clip_start_sec=max(rally_start_t, hit_t - pre_roll),
        clip_end_sec=min(rally_end_t, next_t + post_roll),
        hit_sec=hit_t,
        trajectory=shot.trajectory,
        prev_shot_id=rally.shots[idx - 1].shot_id if idx > 0 else None,
        next_shot_id=rally.shots[idx + 1].shot_id if idx + 1 < len(rally.shots) else None,
    )


def get_rally(bundle: MatchBundle, rally_id: int) -> tuple[GameAnalysis, RallyAnalysis]:
    found = bundle.find_rally(rally_id)
    if found is None:
        raise UnknownRally(rally_id)
    return found
