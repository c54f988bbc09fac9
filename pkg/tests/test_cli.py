import json

import pytest
from click.testing import CliRunner

from shuttlescope.cli import main


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def analyzed_dir(fixture_dir, analyzed_bundle, tmp_path_factory):
    """Fixture dir plus a pre-written bundle.json for stats/serve tests."""
    from shuttlescope.bundle import save_bundle

    out = tmp_path_factory.mktemp("analyzed")
    save_bundle(analyzed_bundle, out / "bundle.json")
    return out


def test_validate_clean_fixture(runner, fixture_dir):
    result = runner.invoke(main, ["validate", str(fixture_dir)])
    assert result.exit_code == 0, result.output
    assert "ok:" in result.output


def test_validate_overlapping_rallies(runner, tmp_path, fixture_dir):
    import shutil

    bad = tmp_path / "bad"
    shutil.copytree(fixture_dir, bad)
    lines = (bad / "rallies.csv").read_text().splitlines()
    parts = lines[1].split(",")
    first_end = int(parts[2])
    second = lines[2].split(",")
    second[1] = str(first_end - 5)  # overlap into the first rally
    lines[2] = ",".join(second)
    (bad / "rallies.csv").write_text("\n".join(lines) + "\n")
    result = runner.invoke(main, ["validate", str(bad)])
    assert result.exit_code == 1
    assert "error" in result.output.lower()


def test_validate_missing_shots_file(runner, tmp_path, fixture_dir):
    import shutil

    bad = tmp_path / "bad"
    shutil.copytree(fixture_dir, bad)
    (bad / "shots.csv").unlink()
    result = runner.invoke(main, ["validate", str(bad)])
    assert result.exit_code == 1


def test_analyze_no_fit_quick(runner, fixture_dir, tmp_path):
    out = tmp_path / "b.json"
    result = runner.invoke(main, ["analyze", str(fixture_dir), "-o", str(out), "--no-fit"])
    assert result.exit_code == 0, result.output
    from shuttlescope.bundle import load_bundle

    bundle = load_bundle(out)
    for _, rally in bundle.iter_rallies():
        assert rally.degenerate  # no physics -> no tendencies -> no labels
        for shot in rally.shots:
            assert shot.tendency is None and shot.trajectory is None


def test_analyze_bad_calibration_fails(runner, tmp_path, fixture_dir):
    import shutil

    bad = tmp_path / "bad"
    shutil.copytree(fixture_dir, bad)
    (bad / "calibration.json").write_text(json.dumps({"keypoints": []}))
    result = runner.invoke(main, ["analyze", str(bad), "-o", str(tmp_path / "x.json")])
    assert result.exit_code == 1


def test_stats_text_and_json(runner, analyzed_dir):
    bundle_path = str(analyzed_dir / "bundle.json")
    result = runner.invoke(main, ["stats", bundle_path])
    assert result.exit_code == 0, result.output
    assert "rallies" in result.output and "winners" in result.output

    result = runner.invoke(main, ["stats", bundle_path, "--format", "json"])
    assert result.exit_code == 0
    payload = json.loads(result.output)
    assert "outcomes" in payload and "heatmap" in payload
    assert len(payload["heatmap"]["from"]) == 12


def test_stats_game_scope(runner, analyzed_dir):
    bundle_path = str(analyzed_dir / "bundle.json")
    result = runner.invoke(main, ["stats", bundle_path, "--game", "1", "--format", "json"])
    assert result.exit_code == 0
    payload = json.loads(result.output)
    assert payload["scope"] == "game 1"
    result = runner.invoke(main, ["stats", bundle_path, "--half", "first"])
    assert result.exit_code == 2  # usage error: --half without --game


def test_stats_empty_scope_reports_zero_shots(runner, analyzed_dir):
    bundle_path = str(analyzed_dir / "bundle.json")
    result = runner.invoke(main, ["stats", bundle_path, "--game", "3"])
    assert result.exit_code == 0
    assert "0 shots" in result.output


def test_synth_writes_fixture_and_is_deterministic(runner, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    r1 = runner.invoke(main, ["synth", str(a), "--seed", "77", "--rallies", "3"])
    assert r1.exit_code == 0, r1.output
    r2 = runner.invoke(main, ["synth", str(b), "--seed", "77", "--rallies", "3"])
    assert r2.exit_code == 0
    assert (a / "track.csv").read_bytes() == (b / "track.csv").read_bytes()


def test_synth_zero_rallies_usage_error(runner, tmp_path):
    result = runner.invoke(main, ["synth", str(tmp_path / "x"), "--seed", "1", "--rallies", "0"])
    assert result.exit_code == 2


def test_serve_missing_data_dir_fails(runner, tmp_path):
    result = runner.invoke(main, ["serve", "--data-dir", str(tmp_path / "nope")])
    assert result.exit_code == 2  # click validates the path


def test_serve_empty_data_dir_fails(runner, tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    result = runner.invoke(main, ["serve", "--data-dir", str(empty)])
    assert result.exit_code == 1


def test_config_file_provides_defaults(runner, tmp_path):
    config = tmp_path / "cfg.json"
    config.write_text(json.dumps({"synth": {"seed": 5, "rallies": 2}}))
    out = tmp_path / "out"
    result = runner.invoke(main, ["--config", str(config), "synth", str(out)])
    assert result.exit_code == 0, result.output
    assert (out / "rallies.csv").exists()


def test_unknown_subcommand_is_usage_error(runner):
    result = runner.invoke(main, ["frobnicate"])
    assert result.exit_code == 2
