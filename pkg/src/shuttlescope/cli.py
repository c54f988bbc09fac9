"""Operator entry point.

    shuttlescope validate  <input-dir>
    shuttlescope analyze   <input-dir> -o bundle.json [--no-fit --vt --zone-bounds --jobs]
    shuttlescope stats     <bundle.json> [--game N [--half first|second]] [--format json]
    shuttlescope synth     <out-dir> --seed N [--rallies N --noise PX --no-poses]
    shuttlescope serve     --data-dir DIR [--video-dir DIR --static-dir DIR --port N --bind H]

Exit codes: 0 ok, 1 validation/data errors, 2 usage errors, 3 internal failure.
"""
from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from .analyze import AnalysisOptions, analyze_match
from .bundle import load_bundle, save_bundle, validate_bundle
from .court import CourtSpec
from .errors import ShuttlescopeError
from .ingest import load_match_dir
from .model import GameHalf, HeatDirection, PlayerId, ShotLabel
from .query import ShotFilter, filter_shots
from .stats import heatmap, summarize_game, summarize_match
from .synth import generate_fixture

EXIT_OK = 0
EXIT_DATA = 1
EXIT_USAGE = 2
EXIT_INTERNAL = 3


def _load_config(ctx: click.Context, _param, value):
    if not value:
        return value
    try:
        overrides = json.loads(Path(value).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise click.BadParameter(f"cannot read config: {exc}")
    ctx.default_map = ctx.default_map or {}
    for command, opts in overrides.items():
        ctx.default_map.setdefault(command, {}).update(opts)
    return value


@click.group()
@click.option(
    "--config",
    type=click.Path(exists=True, dir_okay=False),
    callback=_load_config,
    expose_value=False,
    is_eager=True,
    help="JSON file with per-command option defaults.",
)
def main():
    """Badminton match analysis: ingest annotated video data, reconstruct
    3D shots, derive scores and statistics, and serve the viewer API."""


def _fail_data(message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(EXIT_DATA)


def _guard(fn):
    try:
        fn()
    except ShuttlescopeError as exc:
        _fail_data(str(exc))
    except click.ClickException:
        raise
    except OSError as exc:
        _fail_data(str(exc))
    except Exception as exc:  # noqa: BLE001 - last-resort diagnostic
        click.echo(f"internal failure: {exc!r}", err=True)
        sys.exit(EXIT_INTERNAL)


@main.command()
@click.argument("input_dir", type=click.Path(exists=True, file_okay=False))
def validate(input_dir):
    """Parse and cross-validate an input directory."""

    def run():
        raw = load_match_dir(input_dir)
        n_shots = sum(len(r.shots) for r in raw.rallies)
        click.echo(f"ok: {len(raw.rallies)} rallies, {n_shots} shots, "
                   f"{len(raw.track)} track samples")
        for w in raw.warnings:
            click.echo(f"warning: {w}")

    _guard(run)


def _parse_zone_bounds(_ctx, _param, value):
    if value is None:
        return None
    try:
        b0, b1 = (float(x) for x in value.split(","))
        return (b0, b1)
    except ValueError:
        raise click.BadParameter("expected two comma-separated meters, e.g. '2.233,4.467'")


@main.command()
@click.argument("input_dir", type=click.Path(exists=True, file_okay=False))
@click.option("-o", "--out", "out_path", default="bundle.json", show_default=True,
              type=click.Path(dir_okay=False))
@click.option("--no-fit", is_flag=True, help="Skip trajectory fitting (labels degenerate).")
@click.option("--vt", default=6.8, show_default=True,
              help="Terminal-velocity initialization for the fitter, m/s.")
@click.option("--zone-bounds", callback=_parse_zone_bounds, default=None,
              help="Zone depth boundaries from the net, e.g. '2.233,4.467'.")
@click.option("--jobs", default=os.cpu_count() or 1, show_default="available parallelism",
              help="Parallel workers for per-shot fits.")
def analyze(input_dir, out_path, no_fit, vt, zone_bounds, jobs):
    """Run the full analysis pipeline and write a bundle."""

    def run():
        spec = CourtSpec() if zone_bounds is None else CourtSpec(zone_bounds=zone_bounds)
        raw = load_match_dir(input_dir)
        options = AnalysisOptions(spec=spec, fit=not no_fit, vt_default=vt, jobs=jobs)
        bundle = analyze_match(raw, options)
        report = validate_bundle(bundle)
        save_bundle(bundle, out_path)
        s = bundle.summaries.match
        click.echo(
            f"wrote {out_path}: {s.rally_count} rallies, {s.total_shots} shots, "
            f"games {['%d-%d' % tuple(g) for g in s.game_scores]}"
        )
        for w in bundle.warnings:
            click.echo(f"warning: {w}")
        if not report.ok:
            for e in report.errors:
                click.echo(f"invalid: {e}", err=True)
            sys.exit(EXIT_DATA)

    _guard(run)


def _fmt_seconds(sec: float) -> str:
    m, s = divmod(int(round(sec)), 60)
    return f"{m:d}:{s:02d}"


def _print_heatmap(cells, direction: str):
    by_zone = {c.zone.code: c for c in cells}
    click.echo(f"  shot distribution ({direction}):")
    rows = [
        ("B.back", "B"), ("B.middle", "B"), ("B.front", "B"),
        ("A.front", "A"), ("A.middle", "A"), ("A.back", "A"),
    ]
    for prefix, half in rows:
        depth = prefix.split(".")[1]
        # court drawn from player A's seat: A's left is court +X (right column)
        if half == "A":
            left = by_zone[f"A.{depth}.right"]
            right = by_zone[f"A.{depth}.left"]
        else:
            left = by_zone[f"B.{depth}.left"]
            right = by_zone[f"B.{depth}.right"]
        click.echo(
            f"    {prefix:<9} {left.display_percent:>3d}% ({left.count:>3d})  "
            f"{right.display_percent:>3d}% ({right.count:>3d})"
        )
        if prefix == "B.front":
            click.echo("    " + "-" * 34 + " net")


@main.command("stats")
@click.argument("bundle_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--game", type=int, default=None, help="Restrict to one game.")
@click.option("--half", type=click.Choice(["first", "second"]), default=None)
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text",
              show_default=True)
def stats_cmd(bundle_path, game, half, fmt):
    """Print match/game summaries, outcome counts, and heatmap grids."""

    def run():
        bundle = load_bundle(bundle_path)
        half_val = GameHalf(half) if half else None
        if half_val is not None and game is None:
            raise click.UsageError("--half requires --game")

        f = ShotFilter(game=game, half=half_val)
        shots = filter_shots(bundle, f)
        counts = {
            p: {label: 0 for label in ShotLabel} for p in (PlayerId.A, PlayerId.B)
        }
        for s in shots:
            counts[s.record.hitter][s.label] += 1
        cells_from = heatmap(shots, HeatDirection.FROM)
        cells_to = heatmap(shots, HeatDirection.TO)

        if game is None:
            summary = summarize_match(bundle)
            scores = " ".join("%d-%d" % tuple(g) for g in summary.game_scores)
            scope_name = "match"
        else:
            summary = summarize_game(bundle, game, half_val)
            scores = "%d-%d" % tuple(summary.score)
            scope_name = f"game {game}" + (f" ({half_val.value} half)" if half_val else "")

        short_count = sum(
            1
            for item in bundle.summaries.rallies
            if item.is_short and any(s.record.rally_id == item.rally_id for s in shots)
        )

        if fmt == "json":
            payload = {
                "scope": scope_name,
                "duration_sec": summary.duration_sec,
                "rally_count": summary.rally_count,
                "avg_shots_per_rally": summary.avg_shots_per_rally,
                "rallies_won": {"A": summary.rallies_won_a, "B": summary.rallies_won_b},
                "scores": scores,
                "winner": summary.winner.value if summary.winner else None,
                "outcomes": {
                    p.value: {
                        "winners": counts[p][ShotLabel.WINNER],
                        "errors": counts[p][ShotLabel.ERROR],
                        "normal": counts[p][ShotLabel.NORMAL],
                    }
                    for p in (PlayerId.A, PlayerId.B)
                },
                "short_rallies": short_count,
                "heatmap": {
                    "from": [
                        {"zone": c.zone.code, "count": c.count, "percent": c.display_percent}
                        for c in cells_from
                    ],
                    "to": [
                        {"zone": c.zone.code, "count": c.count, "percent": c.display_percent}
                        for c in cells_to
                    ],
                },
            }
            click.echo(json.dumps(payload, indent=2, sort_keys=True))
            return

        names = {PlayerId.A: bundle.manifest.player_a, PlayerId.B: bundle.manifest.player_b}
        click.echo(f"{scope_name}  [{names[PlayerId.A]} (A) vs {names[PlayerId.B]} (B)]")
        click.echo(f"  duration {_fmt_seconds(summary.duration_sec)}  "
                   f"rallies {summary.rally_count}  "
                   f"avg shots/rally {summary.avg_shots_per_rally:.1f}")
        click.echo(f"  scores {scores}"
                   + (f"  winner {summary.winner.value}" if summary.winner else ""))
        click.echo(f"  rallies won: A {summary.rallies_won_a}  B {summary.rallies_won_b}")
        if summary.empty or not shots:
            click.echo("  0 shots in scope")
            return
        for p in (PlayerId.A, PlayerId.B):
            click.echo(
                f"  {p.value}: winners {counts[p][ShotLabel.WINNER]}  "
                f"errors {counts[p][ShotLabel.ERROR]}  "
                f"normal {counts[p][ShotLabel.NORMAL]}"
            )
        click.echo(f"  short rallies (<10 shots): {short_count}")
        _print_heatmap(cells_from, "from")
        _print_heatmap(cells_to, "to")

    _guard(run)


@main.command()
@click.argument("out_dir", type=click.Path(file_okay=False))
@click.option("--seed", type=int, required=True)
@click.option("--rallies", type=click.IntRange(min=1), default=30, show_default=True)
@click.option("--noise", type=float, default=0.0, show_default=True,
              help="Gaussian pixel noise added to the synthetic track.")
@click.option("--no-poses", is_flag=True, help="Skip poses.jsonl.")
def synth(out_dir, seed, rallies, noise, no_poses):
    """Generate a physically simulated fixture with a ground-truth sidecar."""

    def run():
        match = generate_fixture(
            seed, rallies, out_dir, noise_px=noise, with_poses=not no_poses
        )
        n_shots = sum(len(r.shots) for r in match.rallies)
        scores = " ".join("%d-%d" % tuple(s) for s in match.truth["game_scores"])
        click.echo(f"wrote {out_dir}: {len(match.rallies)} rallies, {n_shots} shots, "
                   f"games {scores}")

    _guard(run)


@main.command()
@click.option("--data-dir", type=click.Path(exists=True, file_okay=False), required=True,
              help="Directory of analyzed bundle .json files.")
@click.option("--video-dir", type=click.Path(exists=True, file_okay=False), default=None)
@click.option("--static-dir", type=click.Path(exists=True, file_okay=False), default=None,
              help="Viewer build to serve at /.")
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--bind", default="127.0.0.1", show_default=True)
def serve(data_dir, video_dir, static_dir, port, bind):
    """Serve the read-only analysis API (and the viewer, if built)."""

    def run():
        import uvicorn

        from .service import ServiceConfig, create_app

        config = ServiceConfig(
            data_dir=Path(data_dir),
            video_dir=Path(video_dir) if video_dir else None,
            static_dir=Path(static_dir) if static_dir else None,
        )
        app = create_app(config)
        uvicorn.run(app, host=bind, port=port, log_level="info")

    _guard(run)


if __name__ == "__main__":
    main()
