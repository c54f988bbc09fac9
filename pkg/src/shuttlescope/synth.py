"""Physically simulated synthetic matches with ground-truth sidecars.

Every rally is generated backwards from its intended outcome: the rally
winner is drawn first, an outcome case (decisive last shot vs. penultimate
shot) is chosen, and shot parameters are resampled until the simulated
flight realizes the intended net-crossing sign. Shots chain exactly: each
one starts at the previous flight's interception point, so the projected
track is a consistent monocular observation of the whole rally.

The sidecar (truth.json) records the generating parameters, tendencies,
labels, and canonical zones so analysis output can be scored against it.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import classify
from .court import CalibrationInput, CameraModel, CourtSpec, Keypoint
from .errors import NoMidpoint
from .flight import FlightParams, TrajectorySample, net_crossing, simulate
from .ingest import (
    MatchManifest,
    PoseFrame,
    PoseInput,
    TrackSample,
    write_calibration,
    write_manifest,
    write_poses,
    write_rallies,
    write_shots,
    write_track,
)
from .model import CourtPoint, GameHalf, PlayerId, RallyRecord, ShotRecord, Tendency
from .stats import ScoringRules, derive_games, half_boundary, player_a_on_negative_y

FPS = 30.0
RALLY_GAP_FRAMES = 60
PRE_SERVE_FRAMES = 6
MIN_SHOT_GAP_FRAMES = 8
MIN_LANDING_FRAMES = 10


@dataclass(frozen=True)
class SynthOptions:
    seed: int
    rallies: int = 30
    noise_px: float = 0.0
    image_size: tuple[int, int] = (1920, 1080)
    with_poses: bool = True


def synthetic_camera(
    image_size: tuple[int, int] = (1920, 1080),
    eye: tuple[float, float, float] = (0.0, -11.0, 11.0),
    target: tuple[float, float, float] = (0.0, 0.0, 1.0),
    focal_px: float = 2400.0,
) -> CameraModel:
    """A fixed elevated broadcast camera behind player A's baseline.

    The default pose and focal length mimic a tight broadcast framing
    (the court nearly fills the image), which is also what makes
    monocular depth well-observed for the trajectory fitter.
    """
    eye_v = np.array(eye, dtype=float)
    up = np.array([0.0, 0.0, 1.0])
    forward = np.array(target, dtype=float) - eye_v
    forward /= np.linalg.norm(forward)
    right = np.cross(forward, up)
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    R = np.stack([right, down, forward])
    t = -R @ eye_v
    K = np.array(
        [[focal_px, 0, image_size[0] / 2.0], [0, focal_px, image_size[1] / 2.0], [0, 0, 1.0]]
    )
    return CameraModel(K @ np.hstack([R, t[:, None]]), image_size)


def standard_keypoints(
    cam: CameraModel, spec: CourtSpec = CourtSpec()
) -> tuple[Keypoint, ...]:
    """Twelve court landmarks with exact projections under `cam`."""
    hw, hl = spec.half_width, spec.half_length
    singles_hw = 2.59
    short_service = 1.98
    pts = [
        CourtPoint(-hw, -hl, 0.0),
        CourtPoint(hw, -hl, 0.0),
        CourtPoint(-hw, hl, 0.0),
        CourtPoint(hw, hl, 0.0),
        CourtPoint(-singles_hw, -short_service, 0.0),
        CourtPoint(singles_hw, -short_service, 0.0),
        CourtPoint(-singles_hw, short_service, 0.0),
        CourtPoint(singles_hw, short_service, 0.0),
        CourtPoint(0.0, -short_service, 0.0),
        CourtPoint(-hw, 0.0, spec.net_height_post),
        CourtPoint(hw, 0.0, spec.net_height_post),
        CourtPoint(0.0, 0.0, spec.net_height_center),
    ]
    from .court import project

    return tuple(Keypoint(p, project(cam, p)) for p in pts)


# ---------------------------------------------------------------------------
# shot sampling
# ---------------------------------------------------------------------------

def _shot_flight(p0: CourtPoint, v0, vt: float) -> list[TrajectorySample]:
    return simulate(FlightParams(p0=p0, v0=v0, vT=vt, t0=0.0), 1.0 / (4.0 * FPS), 3.0)


NET_CLEARANCE = 1.53  # legal shots pass above the tape


def _sample_velocity(rng, p0: CourtPoint, target_sign: float, intent: str):
    """Draw a launch velocity aimed into the opponent's half."""
    tx = rng.uniform(-2.4, 2.4)
    ty = target_sign * rng.uniform(0.8, 6.2)
    dx, dy = tx - p0.x, ty - p0.y
    dist = math.hypot(dx, dy)
    if dist < 1e-6:
        dx, dy, dist = 0.0, target_sign, 1.0
    depth = max(0.0, abs(p0.y) - 2.0)
    if intent == "defensive":
        # a lift must still be rising at the tape: deep lifts are hit harder
        elev = math.radians(rng.uniform(28.0, 60.0))
        speed = rng.uniform(9.0 + 1.4 * depth, 18.0 + 2.4 * depth)
    elif intent == "offensive":
        if p0.z < 1.75 and abs(p0.y) < 2.5:
            # low take near the net: a slow tumble that peaks before the
            # tape is the only descending-at-net shape available
            elev = math.radians(rng.uniform(35.0, 65.0))
            speed = rng.uniform(4.5, 8.5)
        else:
            elev = math.radians(rng.uniform(-14.0, 6.0))
            speed = rng.uniform(16.0 + 1.0 * depth, 42.0)
    else:
        elev = math.radians(rng.uniform(-10.0, 45.0))
        speed = rng.uniform(11.0, 38.0)
    ux, uy = dx / dist, dy / dist
    return (
        speed * math.cos(elev) * ux,
        speed * math.cos(elev) * uy,
        speed * math.sin(elev),
    )


def _find_interception(
    samples: list[TrajectorySample],
    cross_idx: int,
    h_target: float,
    max_y: float = 7.2,
    band: float = 0.5,
) -> int | None:
    """Quarter-frame index where the receiver takes the shuttle.

    The take must fall in a band just under the target height (so an
    intended high or low take really happens there) and keep a margin
    from the net plane, or the follow-up shot could not clear the tape.
    Indices are frame-aligned and respect the minimum shot gap.
    """
    for i in range(cross_idx + 1, len(samples)):
        s = samples[i]
        if s.p.z <= 0.0:
            return None
        if i % 4 != 0 or i // 4 < MIN_SHOT_GAP_FRAMES:
            continue
        if (
            s.v[2] < 0
            and h_target - band <= s.p.z <= h_target
            and abs(s.p.x) <= 3.4
            and 0.8 <= abs(s.p.y) <= max_y
        ):
            return i
    return None


def _cross_index(samples: list[TrajectorySample]) -> int | None:
    for i in range(1, len(samples)):
        if (samples[i - 1].p.y > 0) != (samples[i].p.y > 0) or samples[i].p.y == 0.0:
            return i
    return None


@dataclass
class SynthShot:
    record: ShotRecord
    samples: list[TrajectorySample]  # physical frame, t relative to the hit
    vt: float
    duration_qframes: int  # quarter-frame index where this shot's window ends
    tendency: Tendency | None


@dataclass
class SynthRally:
    record: RallyRecord
    shots: list[SynthShot]
    case: str
    labels: list[str]


@dataclass
class SynthMatch:
    manifest: MatchManifest
    camera: CameraModel
    calibration: CalibrationInput
    rallies: list[SynthRally]
    track: list[TrackSample]
    poses: PoseInput | None
    truth: dict


def _gen_shot(
    rng,
    p0: CourtPoint,
    receiver_sign: float,
    desired: Tendency | None,
    is_last: bool,
    next_desired: Tendency | None = None,
) -> tuple[list[TrajectorySample], int, Tendency, float]:
    """Resample until the flight legally crosses the net with the desired
    sign and supports either an interception (mid-rally) or a long-enough
    fall (final shot).

    The interception height is biased by the NEXT shot's intended
    tendency: a forced lift comes from a low take, a kill from a high
    one, which is what makes every outcome case realizable.
    """
    intent = None
    if desired is Tendency.DEFENSIVE:
        intent = "defensive"
    elif desired is Tendency.OFFENSIVE:
        intent = "offensive"

    for _attempt in range(150):
        chosen = intent or ("defensive" if rng.random() < 0.45 else "offensive")
        v0 = _sample_velocity(rng, p0, receiver_sign, chosen)
        vt = rng.uniform(6.2, 7.4)
        samples = _shot_flight(p0, v0, vt)
        cross = _cross_index(samples)
        if cross is None:
            continue
        nc = net_crossing(samples)
        if nc.p.z < NET_CLEARANCE:
            continue
        got = classify.tendency(nc.v)
        if desired is not None and got is not desired:
            continue
        if is_last:
            land_q = next((i for i, s in enumerate(samples) if s.p.z <= 0.0), None)
            if land_q is None or land_q < 4 * MIN_LANDING_FRAMES:
                continue
            return samples, land_q, got, vt
        if next_desired is Tendency.OFFENSIVE:
            # a kill or tumble follows: either a high take, or low but
            # right at the net
            if rng.random() < 0.25:
                h_target, max_y, band = rng.uniform(1.3, 1.7), 2.2, 0.4
            else:
                h_target, max_y, band = rng.uniform(2.25, 2.7), 6.0, 0.35
        elif next_desired is Tendency.DEFENSIVE:
            # a rising net crossing is only reachable from near/mid court:
            # drag pulls the apex of deep lifts in front of the net
            h_target, max_y, band = rng.uniform(0.8, 1.3), 4.5, 0.5
        else:
            h_target, max_y, band = rng.uniform(1.2, 2.4), 7.2, 0.5
        hit_q = _find_interception(samples, cross, h_target, max_y, band)
        if hit_q is None:
            continue
        return samples, hit_q, got, vt
    raise RuntimeError("could not realize a shot with the requested tendency")


def generate_match(options: SynthOptions) -> SynthMatch:
    if options.rallies < 1:
        raise ValueError("a synthetic match needs at least one rally")
    rng = np.random.default_rng(options.seed)
    rules = ScoringRules()
    spec = CourtSpec()
    cam = synthetic_camera(options.image_size)

    # 1) winner sequence and serve chain (server = previous winner)
    winners: list[PlayerId] = []
    servers: list[PlayerId] = []
    games_won = {PlayerId.A: 0, PlayerId.B: 0}
    score = [0, 0]
    p_a = rng.uniform(0.38, 0.62)
    server = PlayerId.A
    while len(winners) < options.rallies and max(games_won.values()) < rules.games_to_win:
        w = PlayerId.A if rng.random() < p_a else PlayerId.B
        servers.append(server)
        winners.append(w)
        server = w
        score[0 if w is PlayerId.A else 1] += 1
        hi, lo = max(score), min(score)
        if (hi >= rules.points_to_win and hi - lo >= rules.win_by) or hi >= rules.cap:
            games_won[w] += 1
            score = [0, 0]
            p_a = rng.uniform(0.38, 0.62)

    # provisional records so game/half structure is known before simulating
    provisional = [
        RallyRecord(i, i * 1000, i * 1000 + 999, servers[i], winners[i])
        for i in range(len(winners))
    ]
    games_state = derive_games(provisional, rules)
    game_of: dict[int, int] = {}
    half_first: dict[int, bool] = {}
    for gs in games_state:
        try:
            boundary = half_boundary(gs, rules)
        except NoMidpoint:
            boundary = None
        for pos, rid in enumerate(gs.rally_ids):
            game_of[rid] = gs.game_index
            half_first[rid] = boundary is None or pos < boundary

    manifest = MatchManifest(
        video_uri="synthetic.mp4",
        fps=FPS,
        player_a="Player A",
        player_b="Player B",
        event="Synthetic Invitational",
        round=f"seed {options.seed}",
        start_negative_y=PlayerId.A,
    )

    cases = ("winner_last", "winner_penultimate", "error_last", "error_penultimate")
    rallies: list[SynthRally] = []
    track: list[TrackSample] = []
    pose_frames: list[PoseFrame] = []
    truth_rallies: list[dict] = []
    frame = 0

    for rid, (rally_server, rally_winner) in enumerate(zip(servers, winners)):
        loser = rally_winner.opponent
        half = GameHalf.FIRST if half_first[rid] else GameHalf.SECOND
        a_negative = player_a_on_negative_y(PlayerId.A, game_of[rid], half, rules)
        side_sign = {
            PlayerId.A: -1.0 if a_negative else 1.0,
            PlayerId.B: 1.0 if a_negative else -1.0,
        }

        case = cases[int(rng.integers(0, 4))]
        if case == "winner_last":
            last_hitter, desired = rally_winner, Tendency.OFFENSIVE
        elif case == "winner_penultimate":
            last_hitter, desired = loser, Tendency.DEFENSIVE
        elif case == "error_last":
            last_hitter, desired = loser, Tendency.OFFENSIVE
        else:
            last_hitter, desired = rally_winner, Tendency.DEFENSIVE

        n_shots = int(rng.integers(2, 13))
        # hitters alternate from the server; fix parity so the case's
        # intended player hits last
        last_is_server = n_shots % 2 == 1
        if (last_hitter == rally_server) != last_is_server:
            n_shots += 1

        rally_start = frame
        hit0 = rally_start + PRE_SERVE_FRAMES
        hit_frames = [hit0]
        p0 = CourtPoint(
            float(rng.uniform(-2.0, 2.0)),
            side_sign[rally_server] * float(rng.uniform(2.2, 4.2)),
            float(rng.uniform(0.7, 1.1)),
        )

        shots: list[SynthShot] = []
        hitter = rally_server
        for k in range(n_shots):
            is_last = k == n_shots - 1
            receiver = hitter.opponent
            want = desired if is_last else None
            next_want = desired if k == n_shots - 2 else None
            samples, end_q, got, vt = _gen_shot(
                rng, p0, side_sign[receiver], want, is_last, next_want
            )
            record = ShotRecord(rid, k, hit_frames[-1], hitter)
            shots.append(SynthShot(record, samples, vt, end_q, got))
            if not is_last:
                p0 = samples[end_q].p
                hit_frames.append(hit_frames[-1] + end_q // 4)
                hitter = receiver

        land_q = shots[-1].duration_qframes
        end_frame = hit_frames[-1] + (land_q + 3) // 4 + 10
        record = RallyRecord(rid, rally_start, end_frame, rally_server, rally_winner)

        # tendencies feed the truth labels exactly like the classifier would
        tends = [(s.record.hitter, s.tendency) for s in shots]
        outcome = classify.label_rally(tends, rally_winner)

        rallies.append(SynthRally(record, shots, case, [l.value for l in outcome.labels]))

        # track: project the active shot per frame
        for f in range(rally_start, end_frame + 1):
            active = None
            for k in range(len(shots) - 1, -1, -1):
                if f >= hit_frames[k]:
                    active = k
                    break
            visible = False
            u = v = 0.0
            if active is not None:
                q = 4 * (f - hit_frames[active])
                s_list = shots[active].samples
                if q < len(s_list) and s_list[q].p.z > 0.0:
                    pt = s_list[q].p
                    pix = cam.P @ np.array([pt.x, pt.y, pt.z, 1.0])
                    u, v = float(pix[0] / pix[2]), float(pix[1] / pix[2])
                    if options.noise_px > 0:
                        u += float(rng.normal(0.0, options.noise_px))
                        v += float(rng.normal(0.0, options.noise_px))
                    visible = True
            track.append(TrackSample(f, round(u, 6), round(v, 6), visible))

        # poses: players drift linearly between their own hit positions
        if options.with_poses:
            events: dict[PlayerId, list[tuple[int, tuple[float, float]]]] = {
                PlayerId.A: [(rally_start, (0.0, side_sign[PlayerId.A] * 3.2))],
                PlayerId.B: [(rally_start, (0.0, side_sign[PlayerId.B] * 3.2))],
            }
            for shot, hf in zip(shots, hit_frames):
                events[shot.record.hitter].append((hf, (shot.samples[0].p.x, shot.samples[0].p.y)))
            for pl in events:
                events[pl].append((end_frame, events[pl][-1][1]))
            for f in range(rally_start, end_frame + 1):
                pos = {}
                for pl, evs in events.items():
                    for (f0, xy0), (f1, xy1) in zip(evs, evs[1:]):
                        if f0 <= f <= f1:
                            a = 0.0 if f1 == f0 else (f - f0) / (f1 - f0)
                            pos[pl] = (
                                round(xy0[0] + a * (xy1[0] - xy0[0]), 6),
                                round(xy0[1] + a * (xy1[1] - xy0[1]), 6),
                            )
                            break
                pose_frames.append(PoseFrame(f, a=pos.get(PlayerId.A), b=pos.get(PlayerId.B)))

        # truth entry with canonical zones
        shot_truth = []
        for shot in shots:
            samples = shot.samples
            if not a_negative:
                samples = [
                    TrajectorySample(s.t, CourtPoint(-s.p.x, -s.p.y, s.p.z),
                                     (-s.v[0], -s.v[1], s.v[2]))
                    for s in samples
                ]
            fz, tz = classify.shot_zones(samples, spec)
            nc = net_crossing(samples)
            shot_truth.append(
                {
                    "shot_index": shot.record.shot_index,
                    "hitter": shot.record.hitter.value,
                    "hit_frame": shot.record.hit_frame,
                    "p0": [float(c) for c in samples[0].p],
                    "v0": [float(c) for c in samples[0].v],
                    "vt": shot.vt,
                    "speed": float(math.hypot(*shot.samples[0].v)),
                    "tendency": shot.tendency.value if shot.tendency else None,
                    "net_vz": float(nc.v[2]) if nc else None,
                    "from_zone": fz.code,
                    "to_zone": tz.code,
                }
            )
        truth_rallies.append(
            {
                "rally_id": rid,
                "game": game_of[rid],
                "half": "first" if half_first[rid] else "second",
                "server": rally_server.value,
                "winner": rally_winner.value,
                "case": case,
                "labels": [l.value for l in outcome.labels],
                "degenerate": outcome.degenerate,
                "shots": shot_truth,
            }
        )

        frame = end_frame + RALLY_GAP_FRAMES

    calibration = CalibrationInput(
        keypoints=standard_keypoints(cam), image_size=options.image_size
    )
    truth = {
        "seed": options.seed,
        "fps": FPS,
        "game_scores": [list(gs.score) for gs in games_state],
        "rallies": truth_rallies,
    }
    poses = PoseInput(frames=tuple(pose_frames)) if options.with_poses else None
    return SynthMatch(
        manifest=manifest,
        camera=cam,
        calibration=calibration,
        rallies=rallies,
        track=track,
        poses=poses,
        truth=truth,
    )


def write_fixture(match: SynthMatch, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(match.manifest, out / "match.json")
    write_rallies([r.record for r in match.rallies], out / "rallies.csv")
    write_shots(
        [s.record for r in match.rallies for s in r.shots], out / "shots.csv"
    )
    write_track(match.track, out / "track.csv")
    write_calibration(match.calibration, out / "calibration.json")
    if match.poses is not None:
        write_poses(match.poses, out / "poses.jsonl")
    (out / "truth.json").write_text(
        json.dumps(match.truth, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def generate_fixture(seed: int, rallies: int, out_dir: str | Path, **kw) -> SynthMatch:
    match = generate_match(SynthOptions(seed=seed, rallies=rallies, **kw))
    write_fixture(match, out_dir)
    return match
