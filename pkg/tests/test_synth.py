import filecmp
import json

import pytest

from shuttlescope.classify import tendency
from shuttlescope.flight import net_crossing
from shuttlescope.stats import derive_games
from shuttlescope.synth import (
    NET_CLEARANCE,
    SynthOptions,
    generate_fixture,
    generate_match,
)

FILES = ["match.json", "rallies.csv", "shots.csv", "track.csv", "calibration.json",
         "poses.jsonl", "truth.json"]


def test_same_seed_is_byte_identical(tmp_path):
    generate_fixture(21, 5, tmp_path / "a")
    generate_fixture(21, 5, tmp_path / "b")
    for name in FILES:
        assert filecmp.cmp(tmp_path / "a" / name, tmp_path / "b" / name, shallow=False), name


def test_different_seeds_differ(tmp_path):
    generate_fixture(21, 5, tmp_path / "a")
    generate_fixture(22, 5, tmp_path / "b")
    assert not filecmp.cmp(tmp_path / "a" / "track.csv", tmp_path / "b" / "track.csv",
                           shallow=False)


def test_zero_rallies_rejected():
    with pytest.raises(ValueError):
        generate_match(SynthOptions(seed=1, rallies=0))


def test_generated_match_is_physically_legal():
    match = generate_match(SynthOptions(seed=3, rallies=6))
    for rally in match.rallies:
        hitters = [s.record.hitter for s in rally.shots]
        assert all(a != b for a, b in zip(hitters, hitters[1:]))
        assert hitters[0] == rally.record.server
        for shot in rally.shots:
            nc = net_crossing(shot.samples)
            assert nc is not None, "every synthetic shot crosses the net"
            assert nc.p.z >= NET_CLEARANCE - 1e-9
            assert tendency(nc.v) is shot.tendency


def test_generated_scores_agree_with_scoring(tmp_path):
    match = generate_match(SynthOptions(seed=9, rallies=25))
    games = derive_games([r.record for r in match.rallies])
    assert [list(g.score) for g in games] == match.truth["game_scores"]


def test_truth_labels_obey_one_winner_xor_error():
    match = generate_match(SynthOptions(seed=5, rallies=10))
    for entry in match.truth["rallies"]:
        n_win = entry["labels"].count("winner")
        n_err = entry["labels"].count("error")
        if entry["degenerate"]:
            assert n_win + n_err == 0
        else:
            assert n_win + n_err == 1


def test_fixture_files_parse_back(fixture_dir):
    from shuttlescope.ingest import load_match_dir

    raw = load_match_dir(fixture_dir)
    assert raw.poses is not None
    assert len(raw.rallies) > 0
    assert not [w for w in raw.warnings if w.code != "OutOfCourtBounds"]
    truth = json.loads((fixture_dir / "truth.json").read_text())
    assert len(truth["rallies"]) == len(raw.rallies)
