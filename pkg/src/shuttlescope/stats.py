"""Score derivation, game/half segmentation, side canonicalization, and
summary statistics.

Scoring is standard rally scoring: every rally awards one point to its
winner; a game ends at 21 with a two-point lead or at the 30-point cap;
the match is best of three. All four constants are configurable. The
half of a game splits at the first moment the leading side reaches 11.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

from .bundle import MatchBundle, RallyAnalysis, ShotAnalysis, Summaries
from .errors import MissingSideSchedule, NoMidpoint, RalliesAfterMatchEnd
from .flight import FlightParams, NetCrossing, TrajectorySample
from .ingest import PoseFrame
from .model import (
    ALL_ZONES,
    CourtPoint,
    GameHalf,
    GameSummary,
    HeatDirection,
    HeatmapCell,
    MatchSummary,
    PlayerId,
    RallyRecord,
    RallySummary,
)


@dataclass(frozen=True)
class ScoringRules:
    points_to_win: int = 21
    win_by: int = 2
    cap: int = 30
    games_to_win: int = 2
    midpoint: int = 11

    @property
    def final_game_index(self) -> int:
        return 2 * self.games_to_win - 1


@dataclass
class GameState:
    game_index: int  # 1-based
    rally_ids: list[int]
    snapshots: list[tuple[int, int]]  # (score_A, score_B) after each rally
    finished: bool

    @property
    def score(self) -> tuple[int, int]:
        return self.snapshots[-1] if self.snapshots else (0, 0)

    @property
    def winner(self) -> PlayerId | None:
        if not self.finished:
            return None
        a, b = self.score
        return PlayerId.A if a > b else PlayerId.B


def _game_over(score: tuple[int, int], rules: ScoringRules) -> bool:
    a, b = score
    hi, lo = max(a, b), min(a, b)
    return (hi >= rules.points_to_win and hi - lo >= rules.win_by) or hi >= rules.cap


def derive_games(
    rallies: Sequence[RallyRecord], rules: ScoringRules = ScoringRules()
) -> list[GameState]:
    """Run rally-point scoring over the annotated winners.

    Rallies annotated after the match is decided are an error; a partial
    final game is allowed (its state carries finished=False).
    """
    games: list[GameState] = []
    current: GameState | None = None
    games_won = {PlayerId.A: 0, PlayerId.B: 0}

    for rally in rallies:
        if max(games_won.values()) >= rules.games_to_win:
            raise RalliesAfterMatchEnd(rally.rally_id)
        if current is None:
            current = GameState(len(games) + 1, [], [], finished=False)
        a, b = current.snapshots[-1] if current.snapshots else (0, 0)
        if rally.winner is PlayerId.A:
            a += 1
        else:
            b += 1
        current.rally_ids.append(rally.rally_id)
        current.snapshots.append((a, b))
        if _game_over((a, b), rules):
            current.finished = True
            games_won[current.winner] += 1
            games.append(current)
            current = None

    if current is not None:
        games.append(current)
    return games


def half_boundary(game: GameState, rules: ScoringRules = ScoringRules()) -> int:
    """Number of rallies in the game's first half.

    The split falls immediately after the first rally at which the
    leading side's score equals the midpoint (11 by default).
    """
    for i, (a, b) in enumerate(game.snapshots):
        if max(a, b) == rules.midpoint:
            return i + 1
    raise NoMidpoint(
        f"game {game.game_index} never reaches {rules.midpoint} points "
        f"(final score {game.score})"
    )


def match_winner(games: Sequence[GameState], rules: ScoringRules = ScoringRules()) -> PlayerId | None:
    won = {PlayerId.A: 0, PlayerId.B: 0}
    for g in games:
        if g.winner is not None:
            won[g.winner] += 1
    for player, count in won.items():
        if count >= rules.games_to_win:
            return player
    return None


# ---------------------------------------------------------------------------
# side canonicalization
# ---------------------------------------------------------------------------

def _mirror_point(p: CourtPoint) -> CourtPoint:
    return CourtPoint(-p.x, -p.y, p.z)


def _mirror_vec(v) -> tuple[float, float, float]:
    return (-v[0], -v[1], v[2])


def _mirror_shot(shot: ShotAnalysis) -> ShotAnalysis:
    traj = None
    if shot.trajectory is not None:
        traj = tuple(
            TrajectorySample(s.t, _mirror_point(s.p), _mirror_vec(s.v)) for s in shot.trajectory
        )
    nc = None
    if shot.net_crossing is not None:
        nc = NetCrossing(
            shot.net_crossing.t,
            _mirror_point(shot.net_crossing.p),
            _mirror_vec(shot.net_crossing.v),
        )
    fit = shot.fit
    if fit is not None:
        fit = replace(
            fit,
            params=FlightParams(
                p0=_mirror_point(fit.params.p0),
                v0=_mirror_vec(fit.params.v0),
                vT=fit.params.vT,
                t0=fit.params.t0,
            ),
        )
    return replace(shot, trajectory=traj, net_crossing=nc, fit=fit)


def _mirror_pose(pf: PoseFrame) -> PoseFrame:
    flip = lambda xy: (-xy[0], -xy[1]) if xy is not None else None  # noqa: E731
    flip_joints = lambda js: tuple(_mirror_point(j) for j in js) if js is not None else None  # noqa: E731
    return PoseFrame(
        frame=pf.frame,
        a=flip(pf.a),
        b=flip(pf.b),
        a_joints=flip_joints(pf.a_joints),
        b_joints=flip_joints(pf.b_joints),
    )


def player_a_on_negative_y(
    start_negative_y: PlayerId,
    game_index: int,
    half: GameHalf | None,
    rules: ScoringRules = ScoringRules(),
) -> bool:
    """Physical side of player A for a given game and half.

    Ends swap between games and once more at the final game's midpoint.
    """
    flips = game_index - 1
    if game_index == rules.final_game_index and half is GameHalf.SECOND:
        flips += 1
    a_starts_negative = start_negative_y is PlayerId.A
    return a_starts_negative == (flips % 2 == 0)


def canonicalize_sides(bundle: MatchBundle, rules: ScoringRules = ScoringRules()) -> MatchBundle:
    """Mirror spatial data so player A always occupies the negative-Y half.

    Idempotent: an already-canonical bundle is returned unchanged. Zone
    labels, outcome labels, and every non-spatial field are untouched.
    """
    if bundle.canonical:
        return bundle
    start = bundle.manifest.start_negative_y
    if start is None:
        raise MissingSideSchedule()

    games = []
    for game in bundle.games:
        rallies = []
        for rally in game.rallies:
            half = game.half_of(rally)
            if player_a_on_negative_y(start, game.index, half, rules):
                rallies.append(rally)
            else:
                rallies.append(
                    replace(
                        rally,
                        shots=tuple(_mirror_shot(s) for s in rally.shots),
                        poses=tuple(_mirror_pose(p) for p in rally.poses),
                    )
                )
        games.append(replace(game, rallies=tuple(rallies)))
    return replace(bundle, games=tuple(games), canonical=True)


# ---------------------------------------------------------------------------
# summaries
# ---------------------------------------------------------------------------

def _scope_summary(
    rallies: Sequence[RallyAnalysis], fps: float
) -> tuple[float, int, int, float, int, int]:
    duration = sum((r.record.end_frame - r.record.start_frame) for r in rallies) / fps
    shots = sum(r.shot_count for r in rallies)
    won_a = sum(1 for r in rallies if r.record.winner is PlayerId.A)
    won_b = len(rallies) - won_a
    avg = shots / len(rallies) if rallies else 0.0
    return duration, len(rallies), shots, avg, won_a, won_b


def summarize_match(bundle: MatchBundle, rules: ScoringRules = ScoringRules()) -> MatchSummary:
    rallies = [r for _, r in bundle.iter_rallies()]
    duration, count, shots, avg, won_a, won_b = _scope_summary(rallies, bundle.manifest.fps)
    games_won = {PlayerId.A: 0, PlayerId.B: 0}
    for g in bundle.games:
        if g.winner is not None:
            games_won[g.winner] += 1
    winner = None
    for player, n in games_won.items():
        if n >= rules.games_to_win:
            winner = player
    return MatchSummary(
        duration_sec=duration,
        rally_count=count,
        total_shots=shots,
        avg_shots_per_rally=avg,
        rallies_won_a=won_a,
        rallies_won_b=won_b,
        winner=winner,
        game_scores=tuple(g.score for g in bundle.games),
        empty=not rallies,
    )


def _empty_game_summary(game_index: int, half: GameHalf | None) -> GameSummary:
    return GameSummary(
        game_index=game_index,
        half=half,
        duration_sec=0.0,
        rally_count=0,
        total_shots=0,
        avg_shots_per_rally=0.0,
        rallies_won_a=0,
        rallies_won_b=0,
        score=(0, 0),
        winner=None,
        empty=True,
    )


def summarize_game(
    bundle: MatchBundle, game_index: int, half: GameHalf | None = None
) -> GameSummary:
    game = next((g for g in bundle.games if g.index == game_index), None)
    if game is None:
        return _empty_game_summary(game_index, half)
    rallies = list(game.rallies)
    if half is not None and game.half_boundary is not None:
        rallies = (
            rallies[: game.half_boundary] if half is GameHalf.FIRST else rallies[game.half_boundary :]
        )
    elif half is GameHalf.SECOND and game.half_boundary is None:
        rallies = []
    if not rallies:
        return _empty_game_summary(game_index, half)
    duration, count, shots, avg, won_a, won_b = _scope_summary(rallies, bundle.manifest.fps)
    return GameSummary(
        game_index=game_index,
        half=half,
        duration_sec=duration,
        rally_count=count,
        total_shots=shots,
        avg_shots_per_rally=avg,
        rallies_won_a=won_a,
        rallies_won_b=won_b,
        score=rallies[-1].score_after,
        winner=game.winner if half is None else None,
        empty=False,
    )


def summarize_rallies(bundle: MatchBundle) -> tuple[RallySummary, ...]:
    fps = bundle.manifest.fps
    return tuple(
        RallySummary(
            rally_id=r.rally_id,
            duration_sec=(r.record.end_frame - r.record.start_frame) / fps,
            shot_count=r.shot_count,
            is_short=r.is_short,
            score_after=r.score_after,
        )
        for _, r in bundle.iter_rallies()
    )


def compute_summaries(bundle: MatchBundle, rules: ScoringRules = ScoringRules()) -> Summaries:
    """All precomputed summary levels stored inside the bundle."""
    games = tuple(summarize_game(bundle, g.index) for g in bundle.games)
    halves = []
    for g in bundle.games:
        if g.half_boundary is not None:
            halves.append(summarize_game(bundle, g.index, GameHalf.FIRST))
            halves.append(summarize_game(bundle, g.index, GameHalf.SECOND))
    return Summaries(
        match=summarize_match(bundle, rules),
        games=games,
        halves=tuple(halves),
        rallies=summarize_rallies(bundle),
    )


# ---------------------------------------------------------------------------
# heatmap
# ---------------------------------------------------------------------------

def round_half_up_percent(fraction: float) -> int:
    return int(math.floor(fraction * 100.0 + 0.5))


def heatmap(shots: Sequence[ShotAnalysis], direction: HeatDirection) -> list[HeatmapCell]:
    """Per-zone counts and fractions over one direction of a shot set.

    Always returns the full 12-cell grid; shots without a zone (unfitted)
    simply do not count.
    """
    counts = {zone: 0 for zone in ALL_ZONES}
    for shot in shots:
        zone = shot.from_zone if direction is HeatDirection.FROM else shot.to_zone
        if zone is not None:
            counts[zone] += 1
    total = sum(counts.values())
    cells = []
    for zone in ALL_ZONES:
        fraction = counts[zone] / total if total else 0.0
        cells.append(
            HeatmapCell(
                zone=zone,
                direction=direction,
                count=counts[zone],
                fraction=fraction,
                display_percent=round_half_up_percent(fraction),
            )
        )
    return cells
