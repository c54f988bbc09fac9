"""Parsers, writers, and cross-validation for the annotated input file set.

One match directory holds:

    match.json        manifest: video uri, fps, player names, side schedule
    rallies.csv       rally_id,start_frame,end_frame,server,winner
    shots.csv         rally_id,shot_index,hit_frame,hitter
    track.csv         frame,u,v,visible
    calibration.json  {"keypoints": [{x,y,z,u,v}, ...]} or {"projection": [12 floats]}
    poses.jsonl       optional, per frame: {"frame": n, "A": {x, y, joints?}, "B": {...}}

All files are UTF-8 with LF line endings; frames are the canonical time
axis. Parsers fail with typed diagnostics naming the offending key or
line; they never raise anything outside the IngestError family for bad
content. Writers round-trip exactly (floats are written with their
shortest exact representation).
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

from .court import CalibrationInput, CourtSpec, Keypoint
from .errors import (
    AlternationViolation,
    BadPlayerTag,
    BadShotIndex,
    DegenerateConfiguration,
    DuplicateRallyId,
    EmptyRally,
    MalformedNumber,
    MissingField,
    NonMonotoneFrames,
    OrphanShot,
    OverlappingRallies,
    TooFewKeypoints,
    UnreadableFile,
)
from .model import CourtPoint, Diagnostic, PlayerId, RallyRecord, ShotRecord


@dataclass(frozen=True)
class MatchManifest:
    video_uri: str
    fps: float
    player_a: str
    player_b: str
    event: str | None = None
    round: str | None = None
    start_negative_y: PlayerId | None = None

    def name_of(self, player: PlayerId) -> str:
        return self.player_a if player is PlayerId.A else self.player_b


class TrackSample(NamedTuple):
    frame: int
    u: float
    v: float
    visible: bool


@dataclass(frozen=True)
class PoseFrame:
    frame: int
    a: tuple[float, float] | None = None
    b: tuple[float, float] | None = None
    a_joints: tuple[CourtPoint, ...] | None = None
    b_joints: tuple[CourtPoint, ...] | None = None

    def position_of(self, player: PlayerId) -> tuple[float, float] | None:
        return self.a if player is PlayerId.A else self.b


@dataclass(frozen=True)
class PoseInput:
    frames: tuple[PoseFrame, ...]
    warnings: tuple[Diagnostic, ...] = ()

    def position_at(self, player: PlayerId, frame: int) -> tuple[float, float] | None:
        """Player ground position at the pose frame nearest to `frame`."""
        best, best_d = None, None
        for pf in self.frames:
            pos = pf.position_of(player)
            if pos is None:
                continue
            d = abs(pf.frame - frame)
            if best_d is None or d < best_d:
                best, best_d = pos, d
            elif pf.frame > frame and d > best_d:
                break
        return best


@dataclass(frozen=True)
class RawRally:
    record: RallyRecord
    shots: tuple[ShotRecord, ...]


@dataclass(frozen=True)
class RawMatch:
    manifest: MatchManifest
    rallies: tuple[RawRally, ...]
    track: tuple[TrackSample, ...]
    calibration: CalibrationInput
    poses: PoseInput | None = None
    warnings: tuple[Diagnostic, ...] = ()

    @property
    def rally_records(self) -> list[RallyRecord]:
        return [r.record for r in self.rallies]


# ---------------------------------------------------------------------------
# low-level helpers
# ---------------------------------------------------------------------------

def _read_text(path: str | Path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise UnreadableFile(str(exc), path=str(path)) from None


def _int_field(row: dict, key: str, path: str, line: int) -> int:
    raw = row.get(key)
    if raw is None or raw == "":
        raise MissingField(key, path=path, line=line)
    try:
        return int(raw)
    except ValueError:
        raise MalformedNumber(key, raw, path=path, line=line) from None


def _float_field(row: dict, key: str, path: str, line: int) -> float:
    raw = row.get(key)
    if raw is None or raw == "":
        raise MissingField(key, path=path, line=line)
    try:
        return float(raw)
    except ValueError:
        raise MalformedNumber(key, raw, path=path, line=line) from None


def _player_field(row: dict, key: str, path: str, line: int) -> PlayerId:
    raw = row.get(key)
    if raw is None or raw == "":
        raise MissingField(key, path=path, line=line)
    try:
        return PlayerId.parse(raw)
    except ValueError:
        raise BadPlayerTag(raw, path=path, line=line) from None


def _csv_rows(path: str | Path, required: Sequence[str]) -> list[tuple[int, dict]]:
    text = _read_text(path)
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise UnreadableFile("empty file, expected a CSV header", path=str(path))
    for col in required:
        if col not in reader.fieldnames:
            raise MissingField(col, path=str(path), line=1)
    return [(i, row) for i, row in enumerate(reader, start=2)]


# ---------------------------------------------------------------------------
# parsers
# ---------------------------------------------------------------------------

def parse_manifest(path: str | Path) -> MatchManifest:
    text = _read_text(path)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UnreadableFile(f"invalid JSON: {exc}", path=str(path)) from None
    if not isinstance(data, dict):
        raise UnreadableFile("manifest must be a JSON object", path=str(path))

    for key in ("video_uri", "fps", "players"):
        if key not in data:
            raise MissingField(key, path=str(path))
    players = data["players"]
    if not isinstance(players, dict) or "A" not in players or "B" not in players:
        raise MissingField("players.A/players.B", path=str(path))

    fps = data["fps"]
    if not isinstance(fps, (int, float)) or isinstance(fps, bool) or not math.isfinite(fps) or fps <= 0:
        raise MalformedNumber("fps", fps, path=str(path))

    start = data.get("start_negative_y")
    start_player = None
    if start is not None:
        try:
            start_player = PlayerId.parse(start)
        except ValueError:
            raise BadPlayerTag(str(start), path=str(path)) from None

    return MatchManifest(
        video_uri=str(data["video_uri"]),
        fps=float(fps),
        player_a=str(players["A"]),
        player_b=str(players["B"]),
        event=data.get("event"),
        round=data.get("round"),
        start_negative_y=start_player,
    )


def parse_rallies(path: str | Path) -> list[RallyRecord]:
    records = []
    for line, row in _csv_rows(path, ("rally_id", "start_frame", "end_frame", "server", "winner")):
        rid = _int_field(row, "rally_id", str(path), line)
        start = _int_field(row, "start_frame", str(path), line)
        end = _int_field(row, "end_frame", str(path), line)
        if start >= end:
            raise NonMonotoneFrames(
                f"rally {rid} start_frame {start} >= end_frame {end}", path=str(path), line=line
            )
        records.append(
            RallyRecord(
                rally_id=rid,
                start_frame=start,
                end_frame=end,
                server=_player_field(row, "server", str(path), line),
                winner=_player_field(row, "winner", str(path), line),
            )
        )

    records.sort(key=lambda r: r.start_frame)
    seen: set[int] = set()
    for prev, cur in zip([None] + records[:-1], records):
        if cur.rally_id in seen:
            raise DuplicateRallyId(cur.rally_id, path=str(path))
        seen.add(cur.rally_id)
        if prev is not None and cur.start_frame <= prev.end_frame:
            raise OverlappingRallies(cur.rally_id, path=str(path))
    return records


def parse_shots(path: str | Path) -> list[ShotRecord]:
    records = []
    for line, row in _csv_rows(path, ("rally_id", "shot_index", "hit_frame", "hitter")):
        records.append(
            ShotRecord(
                rally_id=_int_field(row, "rally_id", str(path), line),
                shot_index=_int_field(row, "shot_index", str(path), line),
                hit_frame=_int_field(row, "hit_frame", str(path), line),
                hitter=_player_field(row, "hitter", str(path), line),
            )
        )
    records.sort(key=lambda s: (s.rally_id, s.shot_index))
    by_rally: dict[int, list[ShotRecord]] = {}
    for s in records:
        by_rally.setdefault(s.rally_id, []).append(s)
    for rid, shots in by_rally.items():
        for i, s in enumerate(shots):
            if s.shot_index != i:
                raise BadShotIndex(
                    f"rally {rid} shot indices must be 0..{len(shots) - 1} without gaps",
                    path=str(path),
                )
        for prev, cur in zip(shots, shots[1:]):
            if cur.hit_frame <= prev.hit_frame:
                raise NonMonotoneFrames(
                    f"rally {rid} hit frames must be strictly increasing "
                    f"({prev.hit_frame} then {cur.hit_frame})",
                    path=str(path),
                )
    return records


def parse_track(path: str | Path) -> list[TrackSample]:
    samples = []
    prev_frame = None
    for line, row in _csv_rows(path, ("frame", "u", "v", "visible")):
        frame = _int_field(row, "frame", str(path), line)
        vis_raw = row.get("visible")
        if vis_raw not in ("0", "1"):
            raise MalformedNumber("visible", vis_raw, path=str(path), line=line)
        visible = vis_raw == "1"
        u = _float_field(row, "u", str(path), line)
        v = _float_field(row, "v", str(path), line)
        if visible and not (math.isfinite(u) and math.isfinite(v)):
            raise MalformedNumber("u/v", (u, v), path=str(path), line=line)
        if prev_frame is not None and frame <= prev_frame:
            raise NonMonotoneFrames(
                f"track frames must be strictly increasing ({prev_frame} then {frame})",
                path=str(path),
                line=line,
            )
        prev_frame = frame
        samples.append(TrackSample(frame, u, v, visible))
    return samples


def parse_calibration(path: str | Path) -> CalibrationInput:
    text = _read_text(path)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UnreadableFile(f"invalid JSON: {exc}", path=str(path)) from None

    image_size = (1920, 1080)
    if "image_size" in data:
        try:
            w, h = data["image_size"]
            image_size = (int(w), int(h))
        except (TypeError, ValueError):
            raise MalformedNumber("image_size", data.get("image_size"), path=str(path)) from None

    if "projection" in data:
        proj = data["projection"]
        if not isinstance(proj, list) or len(proj) != 12 or not all(
            isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)
            for x in proj
        ):
            raise MalformedNumber("projection", None, path=str(path))
        return CalibrationInput(projection=tuple(float(x) for x in proj), image_size=image_size)

    if "keypoints" not in data:
        raise MissingField("keypoints (or projection)", path=str(path))
    kps = []
    for i, entry in enumerate(data["keypoints"]):
        try:
            kps.append(
                Keypoint(
                    point=CourtPoint(float(entry["x"]), float(entry["y"]), float(entry["z"])),
                    pixel=(float(entry["u"]), float(entry["v"])),
                )
            )
        except (KeyError, TypeError, ValueError):
            raise MalformedNumber(f"keypoints[{i}]", entry, path=str(path)) from None
    if len(kps) < 6:
        raise TooFewKeypoints(len(kps))
    xs = {round(k.point.x, 9) for k in kps}
    ys = {round(k.point.y, 9) for k in kps}
    if len(xs) < 2 or len(ys) < 2:
        raise DegenerateConfiguration("keypoints must span at least two X and two Y values")
    return CalibrationInput(keypoints=tuple(kps), image_size=image_size)


def parse_poses(path: str | Path, spec: CourtSpec = CourtSpec()) -> PoseInput:
    text = _read_text(path)
    frames: list[PoseFrame] = []
    warnings: list[Diagnostic] = []
    prev_frame = None

    def _player(entry: dict | None, tag: str, line: int):
        if entry is None:
            return None, None
        try:
            x, y = float(entry["x"]), float(entry["y"])
        except (KeyError, TypeError, ValueError):
            raise MalformedNumber(f"{tag}.x/y", entry, path=str(path), line=line) from None
        if abs(x) > spec.half_width + 1.0 or abs(y) > spec.half_length + 1.0:
            warnings.append(
                Diagnostic(
                    "OutOfCourtBounds",
                    f"line {line}: player {tag} position ({x:.2f}, {y:.2f}) is more than "
                    "1 m outside the court",
                )
            )
        joints = None
        if "joints" in entry:
            try:
                joints = tuple(CourtPoint(float(j[0]), float(j[1]), float(j[2])) for j in entry["joints"])
            except (TypeError, ValueError, IndexError):
                raise MalformedNumber(f"{tag}.joints", None, path=str(path), line=line) from None
        return (x, y), joints

    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            raise UnreadableFile(f"invalid JSON on line {line_no}: {exc}", path=str(path)) from None
        if "frame" not in data:
            raise MissingField("frame", path=str(path), line=line_no)
        try:
            frame = int(data["frame"])
        except (TypeError, ValueError):
            raise MalformedNumber("frame", data["frame"], path=str(path), line=line_no) from None
        if prev_frame is not None and frame <= prev_frame:
            raise NonMonotoneFrames(
                f"pose frames must be strictly increasing ({prev_frame} then {frame})",
                path=str(path),
                line=line_no,
            )
        prev_frame = frame
        a, a_joints = _player(data.get("A"), "A", line_no)
        b, b_joints = _player(data.get("B"), "B", line_no)
        frames.append(PoseFrame(frame, a, b, a_joints, b_joints))

    return PoseInput(frames=tuple(frames), warnings=tuple(warnings))


# ---------------------------------------------------------------------------
# writers (exact round-trip; floats use their shortest exact repr)
# ---------------------------------------------------------------------------

def write_manifest(manifest: MatchManifest, path: str | Path) -> None:
    data: dict = {
        "video_uri": manifest.video_uri,
        "fps": manifest.fps,
        "players": {"A": manifest.player_a, "B": manifest.player_b},
    }
    if manifest.event is not None:
        data["event"] = manifest.event
    if manifest.round is not None:
        data["round"] = manifest.round
    if manifest.start_negative_y is not None:
        data["start_negative_y"] = manifest.start_negative_y.value
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_rallies(records: Sequence[RallyRecord], path: str | Path) -> None:
    lines = ["rally_id,start_frame,end_frame,server,winner"]
    for r in records:
        lines.append(f"{r.rally_id},{r.start_frame},{r.end_frame},{r.server.value},{r.winner.value}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_shots(records: Sequence[ShotRecord], path: str | Path) -> None:
    lines = ["rally_id,shot_index,hit_frame,hitter"]
    for s in records:
        lines.append(f"{s.rally_id},{s.shot_index},{s.hit_frame},{s.hitter.value}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_track(samples: Sequence[TrackSample], path: str | Path) -> None:
    lines = ["frame,u,v,visible"]
    for s in samples:
        lines.append(f"{s.frame},{s.u!r},{s.v!r},{1 if s.visible else 0}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_calibration(cal: CalibrationInput, path: str | Path) -> None:
    data: dict = {"image_size": list(cal.image_size)}
    if cal.projection is not None:
        data["projection"] = list(cal.projection)
    else:
        data["keypoints"] = [
            {"x": k.point.x, "y": k.point.y, "z": k.point.z, "u": k.pixel[0], "v": k.pixel[1]}
            for k in cal.keypoints
        ]
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_poses(poses: PoseInput, path: str | Path) -> None:
    lines = []
    for pf in poses.frames:
        entry: dict = {"frame": pf.frame}
        if pf.a is not None:
            entry["A"] = {"x": pf.a[0], "y": pf.a[1]}
            if pf.a_joints is not None:
                entry["A"]["joints"] = [[j.x, j.y, j.z] for j in pf.a_joints]
        if pf.b is not None:
            entry["B"] = {"x": pf.b[0], "y": pf.b[1]}
            if pf.b_joints is not None:
                entry["B"]["joints"] = [[j.x, j.y, j.z] for j in pf.b_joints]
        lines.append(json.dumps(entry, sort_keys=True))
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

def assemble(
    manifest: MatchManifest,
    rallies: Sequence[RallyRecord],
    shots: Sequence[ShotRecord],
    track: Sequence[TrackSample],
    calibration: CalibrationInput,
    poses: PoseInput | None = None,
) -> RawMatch:
    """Group shots under rallies and run the cross-file checks.

    Hard failures: a shot pointing at a missing rally or falling outside
    its rally's frame range (OrphanShot), a rally with no shots
    (EmptyRally), and consecutive shots by the same hitter
    (AlternationViolation). Soft findings become warnings: a first shot
    not hit by the annotated server, and a server who did not win the
    previous rally.
    """
    warnings: list[Diagnostic] = list(poses.warnings) if poses is not None else []
    by_rally: dict[int, list[ShotRecord]] = {r.rally_id: [] for r in rallies}
    rally_map = {r.rally_id: r for r in rallies}

    for s in shots:
        rally = rally_map.get(s.rally_id)
        if rally is None or not (rally.start_frame <= s.hit_frame <= rally.end_frame):
            raise OrphanShot(s.rally_id, s.shot_index)
        by_rally[s.rally_id].append(s)

    raw_rallies = []
    for record in rallies:
        rally_shots = sorted(by_rally[record.rally_id], key=lambda s: s.shot_index)
        if not rally_shots:
            raise EmptyRally(record.rally_id)
        for prev, cur in zip(rally_shots, rally_shots[1:]):
            if prev.hitter == cur.hitter:
                raise AlternationViolation(record.rally_id, cur.shot_index)
        if rally_shots[0].hitter != record.server:
            warnings.append(
                Diagnostic(
                    "HitterNotServer",
                    f"first shot hit by {rally_shots[0].hitter.value}, "
                    f"but {record.server.value} is annotated as server",
                    rally_id=record.rally_id,
                    shot_index=0,
                )
            )
        raw_rallies.append(RawRally(record=record, shots=tuple(rally_shots)))

    for prev, cur in zip(rallies, rallies[1:]):
        if cur.server != prev.winner:
            warnings.append(
                Diagnostic(
                    "ServerNotPrevWinner",
                    f"rally {cur.rally_id} served by {cur.server.value} but rally "
                    f"{prev.rally_id} was won by {prev.winner.value}",
                    rally_id=cur.rally_id,
                )
            )

    return RawMatch(
        manifest=manifest,
        rallies=tuple(raw_rallies),
        track=tuple(track),
        calibration=calibration,
        poses=poses,
        warnings=tuple(warnings),
    )


def load_match_dir(path: str | Path) -> RawMatch:
    """Parse and assemble a full input directory."""
    root = Path(path)
    manifest = parse_manifest(root / "match.json")
    rallies = parse_rallies(root / "rallies.csv")
    shots = parse_shots(root / "shots.csv")
    track = parse_track(root / "track.csv")
    calibration = parse_calibration(root / "calibration.json")
    poses_path = root / "poses.jsonl"
    poses = parse_poses(poses_path) if poses_path.exists() else None
    return assemble(manifest, rallies, shots, track, calibration, poses)
