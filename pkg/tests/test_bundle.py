from dataclasses import replace

from shuttlescope.bundle import (
    bundle_from_json,
    bundle_to_json,
    load_bundle,
    save_bundle,
    validate_bundle,
)
from shuttlescope.model import PlayerId, ShotLabel, ShotRecord


def test_toy_bundle_validates_clean(toy_bundle):
    report = validate_bundle(toy_bundle)
    assert report.ok, [str(e) for e in report.errors]


def test_validation_flags_hit_frame_outside_rally(toy_bundle):
    game = toy_bundle.games[0]
    rally = game.rallies[0]
    bad_shot = replace(rally.shots[0], record=replace(rally.shots[0].record, hit_frame=99999))
    bad_rally = replace(rally, shots=(bad_shot,) + rally.shots[1:])
    bad_game = replace(game, rallies=(bad_rally,) + game.rallies[1:])
    bundle = replace(toy_bundle, games=(bad_game,) + toy_bundle.games[1:])
    report = validate_bundle(bundle)
    assert any(
        e.code == "OrphanShot" and e.rally_id == rally.rally_id and e.shot_index == 0
        for e in report.errors
    )


def test_validation_flags_same_hitter_twice(toy_bundle):
    game = toy_bundle.games[0]
    rally = game.rallies[0]
    rec1 = rally.shots[1].record
    bad_shot = replace(rally.shots[1], record=ShotRecord(rec1.rally_id, 1, rec1.hit_frame, PlayerId.A))
    bad_rally = replace(rally, shots=(rally.shots[0], bad_shot, rally.shots[2]))
    bad_game = replace(game, rallies=(bad_rally,) + game.rallies[1:])
    bundle = replace(toy_bundle, games=(bad_game,) + toy_bundle.games[1:])
    report = validate_bundle(bundle)
    assert any(e.code == "AlternationViolation" for e in report.errors)


def test_validation_flags_double_winner(toy_bundle):
    game = toy_bundle.games[0]
    rally = game.rallies[0]
    bad_shot = replace(rally.shots[0], label=ShotLabel.WINNER)
    bad_rally = replace(rally, shots=(bad_shot,) + rally.shots[1:])
    bad_game = replace(game, rallies=(bad_rally,) + game.rallies[1:])
    bundle = replace(toy_bundle, games=(bad_game,) + toy_bundle.games[1:])
    report = validate_bundle(bundle)
    assert any(e.code == "LabelRule" for e in report.errors)


def test_validation_warns_on_server_continuity(toy_bundle):
    # rally 1 of game 1 is served by B although A won rally 0
    report = validate_bundle(toy_bundle)
    assert any(w.code == "ServerNotPrevWinner" for w in report.warnings)


def test_bundle_json_round_trip(toy_bundle):
    data = bundle_to_json(toy_bundle)
    back = bundle_from_json(data)
    assert back.manifest == toy_bundle.manifest
    assert back.spec == toy_bundle.spec
    assert back.canonical == toy_bundle.canonical
    assert len(back.games) == len(toy_bundle.games)
    for (g1, r1, s1), (g2, r2, s2) in zip(toy_bundle.iter_shots(), back.iter_shots()):
        assert s1.record == s2.record
        assert s1.label == s2.label
        assert s1.tendency == s2.tendency
        assert s1.from_zone == s2.from_zone
        assert s1.to_zone == s2.to_zone
        if s1.fit is None:
            assert s2.fit is None
        else:
            assert s1.fit.params == s2.fit.params
            assert s1.fit.converged == s2.fit.converged
        if s1.trajectory is None:
            assert s2.trajectory is None
        else:
            assert len(s1.trajectory) == len(s2.trajectory)
            assert s1.trajectory[0].p == s2.trajectory[0].p
    assert back.summaries.match == toy_bundle.summaries.match
    assert back.summaries.rallies == toy_bundle.summaries.rallies


def test_bundle_file_round_trip_is_stable(toy_bundle, tmp_path):
    p1, p2 = tmp_path / "b1.json", tmp_path / "b2.json"
    save_bundle(toy_bundle, p1)
    save_bundle(load_bundle(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_analyzed_bundle_round_trip_bytes(analyzed_bundle, tmp_path):
    p1, p2 = tmp_path / "b1.json", tmp_path / "b2.json"
    save_bundle(analyzed_bundle, p1)
    save_bundle(load_bundle(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_analyzed_bundle_is_valid(analyzed_bundle):
    report = validate_bundle(analyzed_bundle)
    assert report.ok, [str(e) for e in report.errors]
