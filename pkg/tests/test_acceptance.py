"""Acceptance criteria, one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines; every
tolerance is asserted exactly as stated, nothing is deferred.
"""
import itertools
import json
import math
import time

import numpy as np
from fastapi.testclient import TestClient

from shuttlescope.analyze import analyze_match
from shuttlescope.bundle import save_bundle
from shuttlescope.classify import label_rally
from shuttlescope.court import CalibrationInput, Keypoint, project, solve_camera
from shuttlescope.errors import BehindCamera
from shuttlescope.flight import (
    GRAVITY,
    FlightParams,
    fit_shot,
    net_crossing,
    shot_speed,
    simulate,
)
from shuttlescope.ingest import TrackSample, load_match_dir
from shuttlescope.model import (
    ALL_ZONES,
    CourtPoint,
    GameHalf,
    HeatDirection,
    PlayerId,
    RallyRecord,
    ShotLabel,
    Tendency,
    Zone,
)
from shuttlescope.query import ShotFilter, ShotRole, filter_shots
from shuttlescope.service import ServiceConfig, create_app
from shuttlescope.service.schemas import shot_out
from shuttlescope.stats import derive_games, half_boundary, heatmap
from shuttlescope.synth import generate_fixture, standard_keypoints

A, B = PlayerId.A, PlayerId.B


def _report(num, name):
    print(f"\n[criterion {num:02d}] {name}: PASS")


# ---------------------------------------------------------------------------
# 1. outcome-rule conformance
# ---------------------------------------------------------------------------

def test_criterion_01_outcome_rule_conformance():
    t0 = time.perf_counter()
    for n_shots, last_by_winner, tend in itertools.product(
        (2, 3), (True, False), (Tendency.OFFENSIVE, Tendency.DEFENSIVE)
    ):
        winner = A
        last_hitter = winner if last_by_winner else winner.opponent
        hitters = [
            last_hitter if (n_shots - 1 - i) % 2 == 0 else last_hitter.opponent
            for i in range(n_shots)
        ]
        out = label_rally(
            [(h, tend if i == n_shots - 1 else None) for i, h in enumerate(hitters)],
            rally_winner=winner,
        )
        labels = list(out.labels)
        # the four cases, verbatim
        if tend is Tendency.OFFENSIVE and last_by_winner:
            assert labels[-1] is ShotLabel.WINNER
        elif tend is Tendency.DEFENSIVE and not last_by_winner:
            assert labels[-2] is ShotLabel.WINNER
        elif tend is Tendency.OFFENSIVE and not last_by_winner:
            assert labels[-1] is ShotLabel.ERROR
        else:
            assert labels[-2] is ShotLabel.ERROR
        n_win = labels.count(ShotLabel.WINNER)
        n_err = labels.count(ShotLabel.ERROR)
        assert n_win + n_err == 1 and n_win * n_err == 0
        for i, lab in enumerate(labels):
            if lab is ShotLabel.WINNER:
                assert hitters[i] == winner
            if lab is ShotLabel.ERROR:
                assert hitters[i] == winner.opponent
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0
    _report(1, f"outcome-rule conformance ({elapsed * 1000:.0f} ms)")


# ---------------------------------------------------------------------------
# 2. scoring oracle
# ---------------------------------------------------------------------------

def _brute_force_scoring(winners):
    games, a, b, snaps = [], 0, 0, []
    games_won = {A: 0, B: 0}
    for w in winners:
        if max(games_won.values()) >= 2:
            break
        if w is A:
            a += 1
        else:
            b += 1
        snaps.append((a, b))
        hi, lo = max(a, b), min(a, b)
        if (hi >= 21 and hi - lo >= 2) or hi == 30:
            games.append(((a, b), list(snaps), True))
            games_won[A if a > b else B] += 1
            a = b = 0
            snaps = []
    if snaps:
        games.append(((a, b), list(snaps), False))
    return games


def test_criterion_02_scoring_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240601)
    for _ in range(1000):
        n = int(rng.integers(1, 130))
        p = rng.uniform(0.25, 0.75)
        winners = [A if rng.random() < p else B for _ in range(n)]
        want = _brute_force_scoring(winners)
        # feed derive_games the same truncated sequence the oracle accepted
        count = sum(len(snaps) for _, snaps, _ in want)
        records = [
            RallyRecord(i, i * 10, i * 10 + 5, A, w) for i, w in enumerate(winners[:count])
        ]
        got = derive_games(records)
        assert len(got) == len(want)
        for g, (score, snaps, finished) in zip(got, want):
            assert g.score == score
            assert g.snapshots == snaps
            assert g.finished == finished

    # the published per-game line: 21-11, 19-21, 13-21
    def seq(a_pts, b_pts):
        win, lose = (A, B) if a_pts > b_pts else (B, A)
        hi, lo = max(a_pts, b_pts), min(a_pts, b_pts)
        return [p for _ in range(lo) for p in (win, lose)] + [win] * (hi - lo)

    winners = seq(21, 11) + seq(19, 21) + seq(13, 21)
    records = [RallyRecord(i, i * 10, i * 10 + 5, A, w) for i, w in enumerate(winners)]
    games = derive_games(records)
    assert [g.score for g in games] == [(21, 11), (19, 21), (13, 21)]
    elapsed = time.perf_counter() - t0
    assert elapsed < 5.0
    _report(2, f"scoring oracle, 1000 sequences ({elapsed:.2f} s)")


# ---------------------------------------------------------------------------
# 3. filter identity
# ---------------------------------------------------------------------------

def test_criterion_03_filter_identity(analyzed_bundle):
    bundle = analyzed_bundle
    scopes = [ShotFilter()]
    for game in bundle.games:
        scopes.append(ShotFilter(game=game.index))
        scopes.append(ShotFilter(game=game.index, half=GameHalf.FIRST))
        scopes.append(ShotFilter(game=game.index, half=GameHalf.SECOND))
    checked = 0
    for scope, player in itertools.product(scopes, (A, B)):
        winners = filter_shots(
            bundle, ShotFilter(scope.game, scope.half, player, ShotRole.WINNERS)
        )
        errors = filter_shots(
            bundle, ShotFilter(scope.game, scope.half, player, ShotRole.ERRORS)
        )
        assert all(s.record.hitter is player for s in winners)
        assert all(s.record.hitter is player.opponent for s in errors)
        in_scope = {
            s.shot_id for s in filter_shots(bundle, ShotFilter(scope.game, scope.half))
        }
        rallies_won = sum(
            1
            for _, rally in bundle.iter_rallies()
            if rally.record.winner is player
            and not rally.degenerate
            and any(s.shot_id in in_scope for s in rally.shots)
        )
        assert len(winners) + len(errors) == rallies_won, (scope, player)
        checked += 1
    _report(3, f"filter identity over {checked} scope/player combinations")


# ---------------------------------------------------------------------------
# 4. trajectory recovery
# ---------------------------------------------------------------------------

def test_criterion_04_trajectory_recovery(camera):
    rng = np.random.default_rng(7)
    n_trials = 100
    ok_speed = ok_sign = total = 0
    fit_times = []
    while total < n_trials:
        side = 1.0 if rng.random() < 0.5 else -1.0
        p0 = CourtPoint(
            rng.uniform(-2.5, 2.5), side * rng.uniform(1.5, 6.0), rng.uniform(1.0, 3.0)
        )
        speed = rng.uniform(10.0, 80.0)
        elev = math.radians(rng.uniform(-30.0, 60.0))
        tx, ty = rng.uniform(-2.5, 2.5), -side * rng.uniform(0.5, 6.5)
        d = math.hypot(tx - p0.x, ty - p0.y)
        ux, uy = (tx - p0.x) / d, (ty - p0.y) / d
        v0 = (speed * math.cos(elev) * ux, speed * math.cos(elev) * uy, speed * math.sin(elev))
        true = FlightParams(p0=p0, v0=v0, vT=6.8)
        traj = simulate(true, 1.0 / 120.0, 2.0)
        nc = net_crossing(traj)
        if nc is None or nc.p.z < 1.524:  # legal shots clear the tape
            continue
        obs = []
        usable = True
        for k in range(0, len(traj), 4):
            s = traj[k]
            if s.p.z <= 0:
                break
            try:
                u, v = project(camera, s.p)
            except BehindCamera:
                usable = False
                break
            obs.append(
                TrackSample(k // 4, u + rng.normal(0, 1.0), v + rng.normal(0, 1.0), True)
            )
        if not usable or len(obs) < 8:
            continue
        total += 1
        t0 = time.perf_counter()
        fit = fit_shot(camera, obs, 30.0, 0)
        fit_times.append(time.perf_counter() - t0)
        if abs(shot_speed(fit.params) - speed) / speed <= 0.05:
            ok_speed += 1
        nc_fit = net_crossing(simulate(fit.params, 1.0 / 120.0, 2.0))
        if nc_fit is not None and (nc_fit.v[2] > 0) == (nc.v[2] > 0):
            ok_sign += 1

    median_time = float(np.median(fit_times))
    assert ok_speed / n_trials >= 0.90, f"speed within 5% in only {ok_speed}/{n_trials}"
    assert ok_sign / n_trials >= 0.95, f"tendency sign correct in only {ok_sign}/{n_trials}"
    assert median_time < 2.0
    _report(
        4,
        f"trajectory recovery: speed {ok_speed}%, sign {ok_sign}%, "
        f"median fit {median_time * 1000:.0f} ms",
    )


# ---------------------------------------------------------------------------
# 5. camera solve
# ---------------------------------------------------------------------------

def test_criterion_05_camera_solve(camera):
    kps = standard_keypoints(camera)
    noiseless = solve_camera(CalibrationInput(keypoints=kps))
    assert noiseless.rmse_px < 1e-4

    rng = np.random.default_rng(12)
    noisy_kps = tuple(
        Keypoint(k.point, (k.pixel[0] + rng.normal(0, 1), k.pixel[1] + rng.normal(0, 1)))
        for k in kps
    )
    noisy = solve_camera(CalibrationInput(keypoints=noisy_kps))
    assert noisy.rmse_px <= 2.0

    held_out = [
        CourtPoint(0.0, -6.7, 0.0),
        CourtPoint(0.0, 6.7, 0.0),
        CourtPoint(2.59, 5.94, 0.0),
        CourtPoint(-2.59, -5.94, 0.0),
        CourtPoint(-2.59, 1.98, 0.0),
        CourtPoint(0.0, 0.0, 1.0),
    ]
    errs = [math.dist(project(noisy, p), project(camera, p)) for p in held_out]
    held_rmse = math.sqrt(sum(e * e for e in errs) / len(errs))
    assert held_rmse <= 6.0
    _report(
        5,
        f"camera solve: noiseless {noiseless.rmse_px:.2e} px, noisy fit "
        f"{noisy.rmse_px:.2f} px, held-out {held_rmse:.2f} px",
    )


# ---------------------------------------------------------------------------
# 6. physics sanity
# ---------------------------------------------------------------------------

def test_criterion_06_physics_sanity():
    # no-drag limit vs the analytic parabola
    params = FlightParams(p0=CourtPoint(0, 0, 1.0), v0=(0.0, 10.0, 10.0), vT=1e9)
    for s in simulate(params, 1e-3, 1.5):
        assert abs(s.p.z - (1.0 + 10.0 * s.t - 0.5 * GRAVITY * s.t**2)) < 1e-6

    # drag trajectories dissipate mechanical energy
    for v0 in ((3.0, 25.0, 8.0), (0.0, 60.0, -10.0), (-5.0, 12.0, 20.0)):
        traj = simulate(FlightParams(p0=CourtPoint(0, -5, 2.5), v0=v0, vT=6.8), 1 / 120, 2.0)
        e = [0.5 * sum(c * c for c in s.v) + GRAVITY * s.p.z for s in traj]
        assert all(b <= a + 1e-9 for a, b in zip(e, e[1:]))

    # free fall approaches terminal speed monotonically from below
    drop = simulate(FlightParams(p0=CourtPoint(0, 0, 400.0), v0=(0, 0, 0), vT=6.8), 1e-3, 7.0)
    speeds = [math.hypot(*s.v) for s in drop]
    assert all(b >= a - 1e-12 for a, b in zip(speeds, speeds[1:]))
    assert all(v <= 6.8 + 1e-9 for v in speeds)
    assert speeds[-1] > 6.8 - 1e-3

    # fourth-order convergence on the analytic vertical drop with drag
    vT, z0 = 6.8, 50.0

    def term_err(dt):
        s = simulate(FlightParams(p0=CourtPoint(0, 0, z0), v0=(0, 0, 0), vT=vT), dt, 1.0)[-1]
        exact = z0 - vT * vT / GRAVITY * math.log(math.cosh(GRAVITY * s.t / vT))
        return abs(s.p.z - exact)

    ratio = term_err(2e-3) / term_err(1e-3)
    assert ratio >= 8.0
    _report(6, f"physics sanity (RK4 halving ratio {ratio:.1f}x)")


# ---------------------------------------------------------------------------
# 7. heatmap arithmetic
# ---------------------------------------------------------------------------

def test_criterion_07_heatmap_arithmetic(analyzed_bundle):
    from tests.conftest import _shot

    zone_a, zone_b = Zone.parse("A.back.right"), Zone.parse("B.front.left")
    shots = [_shot(0, i, 10 + i, A, from_zone=zone_a if i < 5 else zone_b) for i in range(9)]
    cells = heatmap(shots, HeatDirection.FROM)
    by_zone = {c.zone: c for c in cells}
    assert by_zone[zone_a].display_percent == 56  # 5 of 9
    assert abs(sum(c.fraction for c in cells) - 1.0) <= 1e-9

    # real analyzed shots, both directions
    real = filter_shots(analyzed_bundle, ShotFilter())
    for direction in (HeatDirection.FROM, HeatDirection.TO):
        cells = heatmap(real, direction)
        total = sum(c.count for c in cells)
        if total:
            assert abs(sum(c.fraction for c in cells) - 1.0) <= 1e-9
    _report(7, "heatmap arithmetic (5/9 cell displays 56%)")


# ---------------------------------------------------------------------------
# 8. half boundary
# ---------------------------------------------------------------------------

def test_criterion_08_half_boundary():
    alternating = [A, B] * 20 + [A, A]
    records = [RallyRecord(i, i * 10, i * 10 + 5, A, w) for i, w in enumerate(alternating)]
    games = derive_games(records)
    assert half_boundary(games[0]) == 21  # 11-10 after rally 21

    straight = [RallyRecord(i, i * 10, i * 10 + 5, A, A) for i in range(21)]
    games = derive_games(straight)
    assert half_boundary(games[0]) == 11
    _report(8, "half boundary (alternating: 21, straight: 11)")


# ---------------------------------------------------------------------------
# 9. end-to-end determinism and label agreement
# ---------------------------------------------------------------------------

def test_criterion_09_end_to_end_determinism(fixture_dir, analyzed_bundle, tmp_path):
    # regenerate the same fixture: byte-identical inputs
    regen = tmp_path / "regen"
    generate_fixture(11, 8, regen)
    for name in ("match.json", "rallies.csv", "shots.csv", "track.csv", "calibration.json"):
        assert (regen / name).read_bytes() == (fixture_dir / name).read_bytes()

    # analyze twice: byte-identical bundles
    second = analyze_match(load_match_dir(fixture_dir))
    p1, p2 = tmp_path / "b1.json", tmp_path / "b2.json"
    save_bundle(analyzed_bundle, p1)
    save_bundle(second, p2)
    assert p1.read_bytes() == p2.read_bytes()

    # label agreement with the ground-truth sidecar
    truth = json.loads((fixture_dir / "truth.json").read_text())
    want = {
        (r["rally_id"], i): lab
        for r in truth["rallies"]
        for i, lab in enumerate(r["labels"])
    }
    agree = total = 0
    for _, rally, shot in analyzed_bundle.iter_shots():
        total += 1
        if want[(rally.rally_id, shot.record.shot_index)] == shot.label.value:
            agree += 1
    assert agree / total >= 0.95, f"label agreement {agree}/{total}"
    _report(9, f"end-to-end determinism, label agreement {agree}/{total}")


# ---------------------------------------------------------------------------
# 10. service equivalence
# ---------------------------------------------------------------------------

def _random_filter(rng) -> ShotFilter:
    game = int(rng.integers(1, 4)) if rng.random() < 0.5 else None
    half = None
    if game is not None and rng.random() < 0.4:
        half = GameHalf.FIRST if rng.random() < 0.5 else GameHalf.SECOND
    scorer = (A if rng.random() < 0.5 else B) if rng.random() < 0.5 else None
    role = rng.choice([ShotRole.ALL, ShotRole.WINNERS, ShotRole.ERRORS])
    hitter = (A if rng.random() < 0.5 else B) if rng.random() < 0.3 else None
    from_zones = to_zones = None
    if rng.random() < 0.3:
        k = int(rng.integers(1, 4))
        from_zones = frozenset(ALL_ZONES[i] for i in rng.choice(12, size=k, replace=False))
    if rng.random() < 0.3:
        k = int(rng.integers(1, 4))
        to_zones = frozenset(ALL_ZONES[i] for i in rng.choice(12, size=k, replace=False))
    return ShotFilter(game, half, scorer, str(role), hitter, from_zones, to_zones)


def test_criterion_10_service_equivalence(analyzed_bundle, tmp_path):
    data = tmp_path / "data"
    data.mkdir()
    save_bundle(analyzed_bundle, data / "m1.json")
    app = create_app(ServiceConfig(data_dir=data))  # no viewer build, no video dir
    client = TestClient(app)

    rally_of = {}
    for _, rally in analyzed_bundle.iter_rallies():
        for s in rally.shots:
            rally_of[s.shot_id] = rally

    rng = np.random.default_rng(99)
    for trial in range(50):
        f = _random_filter(rng)
        params = []
        if f.game is not None:
            params.append(("game", f.game))
        if f.half is not None:
            params.append(("half", f.half.value))
        if f.scorer is not None:
            params.append(("scorer", f.scorer.value))
        if f.role != ShotRole.ALL:
            params.append(("role", f.role))
        if f.hitter is not None:
            params.append(("hitter", f.hitter.value))
        for z in sorted(f.from_zones or (), key=lambda z: z.code):
            params.append(("from_zone", z.code))
        for z in sorted(f.to_zones or (), key=lambda z: z.code):
            params.append(("to_zone", z.code))
        resp = client.get("/api/matches/m1/shots", params=params)
        assert resp.status_code == 200
        body = resp.json()
        want = filter_shots(analyzed_bundle, f)
        want_payload = [
            json.loads(shot_out(rally_of[s.shot_id], s).model_dump_json()) for s in want
        ]
        assert body["count"] == len(want)
        assert body["shots"] == want_payload, f"trial {trial}: {f}"
    _report(10, "service equivalence over 50 random filters")
