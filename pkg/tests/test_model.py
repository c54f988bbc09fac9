import pytest

from shuttlescope.model import Diagnostic, PlayerId, Zone, parse_shot_id, ALL_ZONES


def test_opponent_involution():
    assert PlayerId.A.opponent is PlayerId.B
    assert PlayerId.B.opponent is PlayerId.A
    assert PlayerId.A.opponent.opponent is PlayerId.A


def test_player_parse_rejects_garbage():
    with pytest.raises(ValueError):
        PlayerId.parse("C")


def test_zone_codec_round_trip():
    for zone in ALL_ZONES:
        assert Zone.parse(zone.code) == zone
    assert len(ALL_ZONES) == 12
    assert len(set(ALL_ZONES)) == 12


def test_zone_parse_rejects_bad_code():
    with pytest.raises(ValueError):
        Zone.parse("A.nowhere.left")
    with pytest.raises(ValueError):
        Zone.parse("back.left")


def test_shot_id_round_trip():
    assert parse_shot_id("12-3") == (12, 3)
    with pytest.raises(ValueError):
        parse_shot_id("12:3")


def test_diagnostic_str_mentions_location():
    d = Diagnostic("Code", "message", rally_id=4, shot_index=1)
    assert "rally 4" in str(d) and "shot 1" in str(d)
