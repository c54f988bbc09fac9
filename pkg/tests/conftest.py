import pytest

from shuttlescope.analyze import analyze_match
from shuttlescope.bundle import (
    GameAnalysis,
    MatchBundle,
    RallyAnalysis,
    ShotAnalysis,
    Summaries,
)
from shuttlescope.flight import FitResult, FlightParams, NetCrossing, TrajectorySample
from shuttlescope.ingest import MatchManifest, load_match_dir
from shuttlescope.court import CourtSpec
from shuttlescope.model import (
    CourtPoint,
    PlayerId,
    RallyRecord,
    ShotLabel,
    ShotRecord,
    Tendency,
    Zone,
)
from shuttlescope.stats import compute_summaries
from shuttlescope.synth import generate_fixture, synthetic_camera

SYNTH_SEED = 11
SYNTH_RALLIES = 8


@pytest.fixture(scope="session")
def camera():
    return synthetic_camera()


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth-match")
    generate_fixture(SYNTH_SEED, SYNTH_RALLIES, out)
    return out


@pytest.fixture(scope="session")
def raw_match(fixture_dir):
    return load_match_dir(fixture_dir)


@pytest.fixture(scope="session")
def analyzed_bundle(raw_match):
    return analyze_match(raw_match)


def _shot(
    rally_id,
    idx,
    hit_frame,
    hitter,
    label=ShotLabel.NORMAL,
    tendency=None,
    from_zone=None,
    to_zone=None,
    speed=None,
):
    record = ShotRecord(rally_id, idx, hit_frame, hitter)
    traj = None
    net = None
    if tendency is not None:
        vz = 2.0 if tendency is Tendency.DEFENSIVE else -2.0
        sign = -1.0 if hitter is PlayerId.A else 1.0
        traj = tuple(
            TrajectorySample(
                hit_frame / 30.0 + 0.1 * k,
                CourtPoint(0.0, sign * (2.0 - 1.1 * k), 2.0 - 0.3 * k),
                (0.0, -sign * 11.0, vz),
            )
            for k in range(4)
        )
        net = NetCrossing(hit_frame / 30.0 + 0.2, CourtPoint(0.0, 0.0, 1.8), (0.0, -sign * 11.0, vz))
    fit = None
    if speed is not None:
        fit = FitResult(
            params=FlightParams(
                p0=CourtPoint(0.0, -3.0 if hitter is PlayerId.A else 3.0, 1.8),
                v0=(0.0, speed if hitter is PlayerId.A else -speed, 0.0),
                vT=6.8,
                t0=hit_frame / 30.0,
            ),
            rmse_px=0.1,
            n_obs=12,
            converged=True,
        )
    return ShotAnalysis(
        record=record,
        label=label,
        tendency=tendency,
        from_zone=from_zone,
        to_zone=to_zone,
        speed=speed,
        net_crossing=net,
        fit=fit,
        trajectory=traj,
    )


def build_toy_bundle() -> MatchBundle:
    """Hand-assembled 2-game bundle with known labels and zones.

    Game 1: rallies 0-3 (A, A, B, A win) -> 3-1; game 2: rallies 4-5
    (B, B win) -> 0-2; neither game finished, no half boundaries.
    """
    A, B = PlayerId.A, PlayerId.B
    za_back_left = Zone.parse("A.back.left")
    za_mid_right = Zone.parse("A.middle.right")
    zb_front_left = Zone.parse("B.front.left")
    zb_back_right = Zone.parse("B.back.right")

    def rally(rid, game_index, start, server, winner, shots, score_after, degenerate=False):
        return RallyAnalysis(
            record=RallyRecord(rid, start, start + 200, server, winner),
            game_index=game_index,
            score_after=score_after,
            shots=tuple(shots),
            poses=(),
            degenerate=degenerate,
        )

    rallies_g1 = [
        # rally 0: A serves, A wins with an offensive winner (3 shots)
        rally(
            0, 1, 0, A, A,
            [
                _shot(0, 0, 10, A, from_zone=za_back_left, to_zone=zb_front_left, speed=20.0),
                _shot(0, 1, 60, B, from_zone=zb_front_left, to_zone=za_mid_right, speed=30.0),
                _shot(
                    0, 2, 120, A, label=ShotLabel.WINNER, tendency=Tendency.OFFENSIVE,
                    from_zone=za_back_left, to_zone=zb_back_right, speed=55.0,
                ),
            ],
            (1, 0),
        ),
        # rally 1: B serves, A wins via B's defensive last -> penultimate Winner by A
        rally(
            1, 1, 300, B, A,
            [
                _shot(1, 0, 310, B, from_zone=zb_back_right, to_zone=za_back_left, speed=25.0),
                _shot(
                    1, 1, 360, A, label=ShotLabel.WINNER, tendency=Tendency.OFFENSIVE,
                    from_zone=za_back_left, to_zone=zb_front_left, speed=48.0,
                ),
                _shot(
                    1, 2, 420, B, tendency=Tendency.DEFENSIVE,
                    from_zone=zb_front_left, to_zone=za_mid_right, speed=15.0,
                ),
            ],
            (2, 0),
        ),
        # rally 2: A serves, B wins because A hit an offensive error
        rally(
            2, 1, 600, A, B,
            [
                _shot(2, 0, 610, A, from_zone=za_mid_right, to_zone=zb_front_left, speed=18.0),
                _shot(2, 1, 660, B, from_zone=zb_front_left, to_zone=za_back_left, speed=22.0),
                _shot(
                    2, 2, 720, A, label=ShotLabel.ERROR, tendency=Tendency.OFFENSIVE,
                    from_zone=za_back_left, to_zone=zb_back_right, speed=40.0,
                ),
            ],
            (2, 1),
        ),
        # rally 3: B serves, A wins; A's defensive last -> penultimate Error by B
        rally(
            3, 1, 900, B, A,
            [
                _shot(
                    3, 0, 910, B, label=ShotLabel.ERROR,
                    from_zone=zb_back_right, to_zone=za_mid_right, speed=35.0,
                ),
                _shot(
                    3, 1, 960, A, tendency=Tendency.DEFENSIVE,
                    from_zone=za_mid_right, to_zone=zb_front_left, speed=12.0,
                ),
            ],
            (3, 1),
        ),
    ]
    rallies_g2 = [
        rally(
            4, 2, 1200, A, B,
            [
                _shot(4, 0, 1210, A, from_zone=za_back_left, to_zone=zb_front_left, speed=21.0),
                _shot(
                    4, 1, 1260, B, label=ShotLabel.WINNER, tendency=Tendency.OFFENSIVE,
                    from_zone=zb_front_left, to_zone=za_mid_right, speed=52.0,
                ),
            ],
            (0, 1),
        ),
        # degenerate rally: single-shot serve, no labels
        rally(
            5, 2, 1500, B, B,
            [_shot(5, 0, 1510, B, from_zone=zb_back_right, to_zone=za_back_left, speed=19.0)],
            (0, 2),
            degenerate=True,
        ),
    ]
    games = (
        GameAnalysis(1, (3, 1), None, False, None, tuple(rallies_g1)),
        GameAnalysis(2, (0, 2), None, False, None, tuple(rallies_g2)),
    )
    manifest = MatchManifest(
        video_uri="toy.mp4",
        fps=30.0,
        player_a="Alice",
        player_b="Bram",
        start_negative_y=PlayerId.A,
    )
    bundle = MatchBundle(
        manifest=manifest,
        spec=CourtSpec(),
        camera=None,
        games=games,
        summaries=Summaries(
            match=None, games=(), halves=(), rallies=()  # type: ignore[arg-type]
        ),
        canonical=True,
        warnings=(),
    )
    from dataclasses import replace

    return replace(bundle, summaries=compute_summaries(bundle))


@pytest.fixture()
def toy_bundle():
    return build_toy_bundle()
