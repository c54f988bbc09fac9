"""Core domain types shared by every stage of the analysis pipeline.

Court frame convention (used everywhere, never restated):
  * origin at court center, on the ground, directly under the net
  * X across the court width, Y along its length, Z up
  * player A canonically occupies the negative-Y half, player B positive-Y

All positions are meters in this frame; times are seconds; the canonical
time axis on disk is integer video frames (seconds = frame / fps).
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

Vec3 = tuple[float, float, float]


class PlayerId(str, Enum):
    A = "A"
    B = "B"

    @property
    def opponent(self) -> "PlayerId":
        return PlayerId.B if self is PlayerId.A else PlayerId.A

    @classmethod
    def parse(cls, tag: str) -> "PlayerId":
        if tag == "A":
            return cls.A
        if tag == "B":
            return cls.B
        raise ValueError(f"bad player tag {tag!r}")


class Side(str, Enum):
    """Left/right from the occupying player's own viewpoint, facing the net.

    This is coach vocabulary ("backhand side"), so the mapping to court X
    flips between halves: on half A (y < 0) x >= 0 is LEFT, on half B
    x >= 0 is RIGHT.
    """

    LEFT = "left"
    RIGHT = "right"


class Depth(str, Enum):
    FRONT = "front"
    MIDDLE = "middle"
    BACK = "back"


class ShotLabel(str, Enum):
    WINNER = "winner"
    ERROR = "error"
    NORMAL = "normal"


class Tendency(str, Enum):
    OFFENSIVE = "offensive"
    DEFENSIVE = "defensive"


class GameHalf(str, Enum):
    FIRST = "first"
    SECOND = "second"


class CourtPoint(NamedTuple):
    x: float
    y: float
    z: float = 0.0


@dataclass(frozen=True)
class Zone:
    """One of the 12 player-relative court regions (6 per half)."""

    half: PlayerId
    depth: Depth
    side: Side

    @property
    def code(self) -> str:
        return f"{self.half.value}.{self.depth.value}.{self.side.value}"

    @classmethod
    def parse(cls, code: str) -> "Zone":
        try:
            half, depth, side = code.split(".")
            return cls(PlayerId.parse(half), Depth(depth), Side(side))
        except ValueError:
            raise ValueError(f"bad zone code {code!r}; expected e.g. 'A.back.left'") from None


ALL_ZONES: tuple[Zone, ...] = tuple(
    Zone(half, depth, side)
    for half in (PlayerId.A, PlayerId.B)
    for depth in (Depth.FRONT, Depth.MIDDLE, Depth.BACK)
    for side in (Side.LEFT, Side.RIGHT)
)


@dataclass(frozen=True)
class RallyRecord:
    rally_id: int
    start_frame: int
    end_frame: int
    server: PlayerId
    winner: PlayerId


@dataclass(frozen=True)
class ShotRecord:
    rally_id: int
    shot_index: int
    hit_frame: int
    hitter: PlayerId

    @property
    def shot_id(self) -> str:
        return f"{self.rally_id}-{self.shot_index}"


def parse_shot_id(shot_id: str) -> tuple[int, int]:
    """Split a 'rally-shot' id back into (rally_id, shot_index)."""
    try:
        rid, idx = shot_id.split("-")
        return int(rid), int(idx)
    except ValueError:
        raise ValueError(f"bad shot id {shot_id!r}; expected '<rally>-<index>'") from None


class HeatDirection(str, Enum):
    FROM = "from"
    TO = "to"


@dataclass(frozen=True)
class MatchSummary:
    duration_sec: float
    rally_count: int
    total_shots: int
    avg_shots_per_rally: float
    rallies_won_a: int
    rallies_won_b: int
    winner: PlayerId | None
    game_scores: tuple[tuple[int, int], ...]
    empty: bool = False


@dataclass(frozen=True)
class GameSummary:
    game_index: int
    half: GameHalf | None
    duration_sec: float
    rally_count: int
    total_shots: int
    avg_shots_per_rally: float
    rallies_won_a: int
    rallies_won_b: int
    score: tuple[int, int]
    winner: PlayerId | None
    empty: bool = False


@dataclass(frozen=True)
class RallySummary:
    rally_id: int
    duration_sec: float
    shot_count: int
    is_short: bool  # fewer than 10 shots
    score_after: tuple[int, int]


@dataclass(frozen=True)
class HeatmapCell:
    zone: Zone
    direction: HeatDirection
    count: int
    fraction: float
    display_percent: int  # fraction * 100 rounded half-up


@dataclass(frozen=True)
class Diagnostic:
    """A non-fatal finding tied to a location in the match data."""

    code: str
    message: str
    rally_id: int | None = None
    shot_index: int | None = None

    def __str__(self) -> str:
        loc = ""
        if self.rally_id is not None:
            loc = f" (rally {self.rally_id}"
            if self.shot_index is not None:
                loc += f", shot {self.shot_index}"
            loc += ")"
        return f"{self.code}: {self.message}{loc}"
