"""End-to-end analysis: raw annotated inputs to a derived MatchBundle.

Stage order matters: trajectories are fitted in the physical (camera)
frame, sides are canonicalized so player A always occupies the negative-Y
half, and only then are tendencies, outcome labels, and zones derived,
because zones are player-relative. The pipeline is deterministic: no
randomness anywhere, so identical inputs yield byte-identical bundles.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

from . import classify
from .bundle import (
    GameAnalysis,
    MatchBundle,
    RallyAnalysis,
    ShotAnalysis,
    Summaries,
    ValidationReport,
    validate_bundle,
)
from .court import CameraModel, CourtSpec, solve_camera
from .errors import NoMidpoint, TooFewObservations
from .flight import (
    FitResult,
    TrajectorySample,
    fit_shot,
    net_crossing,
    shot_speed,
    simulate,
)
from .ingest import RawMatch, RawRally
from .model import Diagnostic, MatchSummary
from .stats import (
    ScoringRules,
    canonicalize_sides,
    compute_summaries,
    derive_games,
    half_boundary,
)


@dataclass(frozen=True)
class AnalysisOptions:
    spec: CourtSpec = CourtSpec()
    rules: ScoringRules = ScoringRules()
    fit: bool = True
    vt_default: float = 6.8
    jobs: int = 1


def _shot_windows(rally: RawRally) -> list[tuple[int, int]]:
    """(hit_frame, window_end) per shot; the window ends at the next hit
    or the rally's final frame."""
    windows = []
    for i, shot in enumerate(rally.shots):
        if i + 1 < len(rally.shots):
            end = rally.shots[i + 1].hit_frame
        else:
            end = rally.record.end_frame
        windows.append((shot.hit_frame, end))
    return windows


def _fit_one(args) -> tuple[FitResult | None, tuple[TrajectorySample, ...] | None]:
    cam, window_obs, fps, hit_frame, window_end, pose_xy, vt_init = args
    try:
        fit = fit_shot(cam, window_obs, fps, hit_frame, window_end, pose_xy=pose_xy, vt_init=vt_init)
    except TooFewObservations:
        return None, None
    t_end = max((window_end - hit_frame) / fps, 2.0 / fps)
    samples = simulate(fit.params, 1.0 / (4.0 * fps), t_end)
    return fit, tuple(samples)


def _fit_all(
    raw: RawMatch, cam: CameraModel, options: AnalysisOptions
) -> dict[tuple[int, int], tuple[FitResult | None, tuple[TrajectorySample, ...] | None]]:
    fps = raw.manifest.fps
    tasks = []
    keys = []
    for rally in raw.rallies:
        windows = _shot_windows(rally)
        track = [s for s in raw.track if rally.record.start_frame <= s.frame <= rally.record.end_frame]
        for shot, (hit, end) in zip(rally.shots, windows):
            window_obs = [s for s in track if hit <= s.frame <= end]
            pose_xy = None
            if raw.poses is not None:
                pose_xy = raw.poses.position_at(shot.hitter, hit)
            keys.append((shot.rally_id, shot.shot_index))
            tasks.append((cam, window_obs, fps, hit, end, pose_xy, options.vt_default))

    if options.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=options.jobs) as pool:
            results = list(pool.map(_fit_one, tasks, chunksize=4))
    else:
        results = [_fit_one(t) for t in tasks]
    return dict(zip(keys, results))


def _classify_rally(rally: RallyAnalysis, spec: CourtSpec) -> tuple[RallyAnalysis, Diagnostic | None]:
    """Fill tendencies, zones, speeds, and outcome labels for one rally."""
    classified = []
    for shot in rally.shots:
        tendency = None
        net_cross = None
        from_zone = to_zone = None
        speed = None
        if shot.trajectory is not None and len(shot.trajectory) >= 2:
            net_cross = net_crossing(shot.trajectory)
            if net_cross is not None:
                tendency = classify.tendency(net_cross.v)
            from_zone, to_zone = classify.shot_zones(shot.trajectory, spec)
        if shot.fit is not None:
            speed = shot_speed(shot.fit.params)
        classified.append(
            replace(
                shot,
                tendency=tendency,
                net_crossing=net_cross,
                from_zone=from_zone,
                to_zone=to_zone,
                speed=speed,
            )
        )

    outcome = classify.label_rally(
        [(s.record.hitter, s.tendency) for s in classified], rally.record.winner
    )
    classified = [replace(s, label=label) for s, label in zip(classified, outcome.labels)]
    diag = None
    if outcome.degenerate:
        diag = Diagnostic("DegenerateRally", outcome.warning or "rally left unlabeled",
                          rally_id=rally.rally_id)
    return replace(rally, shots=tuple(classified), degenerate=outcome.degenerate), diag


def analyze_match(raw: RawMatch, options: AnalysisOptions = AnalysisOptions()) -> MatchBundle:
    """Run the full pipeline over an assembled raw match."""
    warnings: list[Diagnostic] = list(raw.warnings)
    cam = solve_camera(raw.calibration, options.spec)

    fits: dict[tuple[int, int], tuple[FitResult | None, tuple[TrajectorySample, ...] | None]]
    if options.fit:
        fits = _fit_all(raw, cam, options)
    else:
        fits = {}

    games_state = derive_games(raw.rally_records, options.rules)
    if games_state and not games_state[-1].finished:
        warnings.append(
            Diagnostic(
                "UnfinishedFinalGame",
                f"game {games_state[-1].game_index} ends at {games_state[-1].score} "
                "without a winner",
            )
        )

    rally_by_id = {r.record.rally_id: r for r in raw.rallies}
    games = []
    for gs in games_state:
        rallies = []
        for rally_id, score_after in zip(gs.rally_ids, gs.snapshots):
            raw_rally = rally_by_id[rally_id]
            shots = []
            for shot in raw_rally.shots:
                fit, traj = fits.get((rally_id, shot.shot_index), (None, None))
                if options.fit and fit is None:
                    warnings.append(
                        Diagnostic(
                            "TooFewObservations",
                            "shot carried without a trajectory (fewer than 8 visible samples)",
                            rally_id=rally_id,
                            shot_index=shot.shot_index,
                        )
                    )
                shots.append(ShotAnalysis(record=shot, fit=fit, trajectory=traj))
            poses = ()
            if raw.poses is not None:
                poses = tuple(
                    pf
                    for pf in raw.poses.frames
                    if raw_rally.record.start_frame <= pf.frame <= raw_rally.record.end_frame
                )
            rallies.append(
                RallyAnalysis(
                    record=raw_rally.record,
                    game_index=gs.game_index,
                    score_after=score_after,
                    shots=tuple(shots),
                    poses=poses,
                )
            )
        try:
            boundary = half_boundary(gs, options.rules)
        except NoMidpoint:
            boundary = None
        games.append(
            GameAnalysis(
                index=gs.game_index,
                score=gs.score,
                winner=gs.winner,
                finished=gs.finished,
                half_boundary=boundary,
                rallies=tuple(rallies),
            )
        )

    placeholder = Summaries(
        match=MatchSummary(0.0, 0, 0, 0.0, 0, 0, None, (), empty=True),
        games=(),
        halves=(),
        rallies=(),
    )
    bundle = MatchBundle(
        manifest=raw.manifest,
        spec=options.spec,
        camera=cam,
        games=tuple(games),
        summaries=placeholder,
        canonical=False,
        warnings=(),
    )

    bundle = canonicalize_sides(bundle, options.rules)

    games = []
    for game in bundle.games:
        rallies = []
        for rally in game.rallies:
            rally, diag = _classify_rally(rally, options.spec)
            if diag is not None:
                warnings.append(diag)
            rallies.append(rally)
        games.append(replace(game, rallies=tuple(rallies)))
    bundle = replace(bundle, games=tuple(games), warnings=tuple(warnings))

    return replace(bundle, summaries=compute_summaries(bundle, options.rules))


def analyze_and_validate(
    raw: RawMatch, options: AnalysisOptions = AnalysisOptions()
) -> tuple[MatchBundle, ValidationReport]:
    bundle = analyze_match(raw, options)
    return bundle, validate_bundle(bundle)
