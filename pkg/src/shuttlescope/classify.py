"""Shot statistics: tendency, rally outcome labels, and from/to zones.

The outcome rule is a four-way case split on the final shot of a rally:

    last shot offensive, hit by the rally winner  -> that shot is the Winner
    last shot defensive, hit by the rally loser   -> the penultimate shot is the Winner
    last shot offensive, hit by the rally loser   -> that shot is the Error
    last shot defensive, hit by the rally winner  -> the penultimate shot is the Error

Everything else is Normal. Rallies where the rule cannot apply (a single
shot when the penultimate is needed, or no net crossing on the last shot)
are degenerate: every shot is Normal and a warning is emitted instead of
guessing.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .court import CourtSpec, zone_of
from .flight import TrajectorySample, landing_point
from .model import CourtPoint, PlayerId, ShotLabel, Tendency, Vec3, Zone


def tendency(net_velocity: Vec3) -> Tendency:
    """Classify by the vertical velocity as the shuttle passes the net:
    rising is defensive, descending or flat is offensive."""
    return Tendency.DEFENSIVE if net_velocity[2] > 0 else Tendency.OFFENSIVE


@dataclass(frozen=True)
class RallyLabels:
    labels: tuple[ShotLabel, ...]
    degenerate: bool
    warning: str | None = None


def label_rally(
    shots: Sequence[tuple[PlayerId, Tendency | None]], rally_winner: PlayerId
) -> RallyLabels:
    """Label every shot of a rally given (hitter, tendency) pairs.

    The tendency of non-final shots is irrelevant; the final shot's
    tendency and hitter select one of the four cases above.
    """
    if not shots:
        raise ValueError("label_rally needs at least one shot")
    n = len(shots)
    labels = [ShotLabel.NORMAL] * n
    last_hitter, last_tendency = shots[-1]

    if last_tendency is None:
        return RallyLabels(
            tuple(labels),
            degenerate=True,
            warning="last shot has no net crossing; rally left unlabeled",
        )

    offensive = last_tendency is Tendency.OFFENSIVE
    by_winner = last_hitter == rally_winner

    if offensive:
        labels[-1] = ShotLabel.WINNER if by_winner else ShotLabel.ERROR
        return RallyLabels(tuple(labels), degenerate=False)

    # defensive last shot: the decisive shot is the penultimate one
    if n < 2:
        return RallyLabels(
            tuple(labels),
            degenerate=True,
            warning="single-shot rally with a defensive serve; rally left unlabeled",
        )
    penultimate_hitter = shots[-2][0]
    if not by_winner:
        # loser lifted a hopeless defense: the winner's previous shot won it
        if penultimate_hitter != rally_winner:
            raise ValueError("penultimate Winner must be hit by the rally winner")
        labels[-2] = ShotLabel.WINNER
    else:
        # winner's weak defense still won the rally: the loser erred before
        if penultimate_hitter != rally_winner.opponent:
            raise ValueError("penultimate Error must be hit by the rally loser")
        labels[-2] = ShotLabel.ERROR
    return RallyLabels(tuple(labels), degenerate=False)


def shot_zones(
    trajectory: Sequence[TrajectorySample], spec: CourtSpec = CourtSpec()
) -> tuple[Zone, Zone]:
    """Project a shot's start and endpoint onto the court's zone grid.

    The endpoint prefers the interpolated ground contact over the last
    sample: observations stop at occlusion, physics completes the arc.
    """
    if len(trajectory) < 2:
        raise ValueError("shot_zones needs at least two trajectory samples")
    start = trajectory[0].p
    from_zone = zone_of(CourtPoint(start.x, start.y, 0.0), spec)
    land = landing_point(trajectory)
    if land is None:
        end = trajectory[-1].p
        land = CourtPoint(end.x, end.y, 0.0)
    return from_zone, zone_of(land, spec)
