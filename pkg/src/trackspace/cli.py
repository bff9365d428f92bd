"""Command-line entry point: plan, simulate, analyze, experiment.

Exit codes: 0 success, 2 input error, 3 mission aborted.
"""

from __future__ import annotations

import logging
import os
import sys
import tempfile
from pathlib import Path

import click

from .analysis import compare_missions, coverage_metrics, rr_histogram, summarize_grid
from .config import OUTPUT_ROOT_ENV, SpecError, load_spec
from .core import InfeasiblePairing, TrackspaceError
from .planner import RangeInterval, format_plan, layout_tracks, polygon_adaptation
from .simulator import (
    COUNT_HEADER,
    GridFormatError,
    MissionResult,
    format_grid,
    read_grid,
    run_mission,
)

EXIT_INPUT = 2
EXIT_ABORT = 3


def _fail(message: str, code: int = EXIT_INPUT):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _default_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "trackspace_out"))


def _history_text(result: MissionResult) -> str:
    lines = ["# r_adpt history v1", "after_track,r_adpt_m"]
    lines += [f"{i},{r!r}" for i, r in result.r_adpt_history]
    lines += ["# replans", "after_track,r_eff_m,r_adpt_m,covered_up_to_m"]
    lines += [f"{e.after_track},{e.r_eff_m!r},{e.r_adpt_m!r},{e.covered_up_to_m!r}"
              for e in result.replans]
    if result.aborted:
        lines.append(f"# ABORTED: {result.abort_reason}")
    return "\n".join(lines) + "\n"


def write_mission(result: MissionResult, out: Path, prefix: str) -> None:
    write_atomic(out / f"{prefix}_rr.csv", format_grid(result.grid.cells, result.grid.cell_size_m))
    write_atomic(out / f"{prefix}_looks.csv",
                 format_grid(result.grid.look_counts, result.grid.cell_size_m, COUNT_HEADER))
    write_atomic(out / f"{prefix}_plan.csv", format_plan(result.plan))
    write_atomic(out / f"{prefix}_history.csv", _history_text(result))


def analysis_report(grid, k: int, margin: int = 0, bins: int = 20, seed: int = 0) -> str:
    cov = coverage_metrics(grid, margin)
    hist = rr_histogram(grid, bins, margin)
    summary = summarize_grid(grid, k, 0, margin, seed)
    lines = [
        "# analysis v1",
        f"analyzed_cells = {cov.analyzed_cells}",
        f"uncovered_cells = {cov.uncovered_cells}",
        f"uncovered_area_m2 = {cov.uncovered_area_m2!r}",
        f"uncovered_fraction = {cov.uncovered_fraction!r}",
        f"mean_full = {summary.mean_full!r}",
    ]
    for j, (w, m, s) in enumerate(summary.fit.components):
        lines.append(f"gmm.{j} = weight {w!r} mean {m!r} sd {s!r}")
    lines.append(f"gmm.log_likelihood = {summary.fit.log_likelihood!r}")
    lines += [f"rc_mean = {summary.rc_mean!r}", f"rc_sd = {summary.rc_sd!r}",
              f"rc_n = {summary.rc_n}", "# histogram: lower,upper,count"]
    for lo, hi, c in zip(hist.edges[:-1], hist.edges[1:], hist.counts):
        lines.append(f"{lo:.4f},{hi:.4f},{c}")
    return "\n".join(lines) + "\n"


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log replanning decisions.")
def main(verbose):
    """Adaptive track spacing for side-looking sonar surveys."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.option("--width", type=float, required=True, help="Survey width along the sweep axis (m).")
@click.option("--rmin", type=float, required=True, help="Nadir half-gap (m).")
@click.option("--rlow", type=float, required=True, help="Lower end of the range search (m).")
@click.option("--rhigh", type=float, required=True, help="Upper end of the range search (m).")
@click.option("--step", type=float, default=1.0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Track table destination (default: <output root>/plan.csv).")
def plan(width, rmin, rlow, rhigh, step, out):
    """Choose the adapted range for a strip and lay out its tracks."""
    if min(width, rmin, rlow, rhigh) <= 0:
        _fail("all lengths must be positive")
    if rlow > rhigh:
        _fail(f"--rlow {rlow:g} exceeds --rhigh {rhigh:g}")
    try:
        if rlow < 3 * rmin:
            raise InfeasiblePairing(f"--rlow {rlow:g} m is below 3 x r_min = {3 * rmin:g} m")
        r_adpt = polygon_adaptation(width, RangeInterval(rlow, rhigh, step), rmin)
        layout = layout_tracks(width, r_adpt, rmin)
    except InfeasiblePairing as exc:
        _fail(str(exc))
    out = out or _default_root() / "plan.csv"
    write_atomic(out, format_plan(layout))
    click.echo(f"r_adpt {r_adpt:g} m, {len(layout)} tracks -> {out}")


@main.command()
@click.argument("spec")
@click.option("--strategy", type=click.Choice(["predefined", "adaptive"]), default="adaptive",
              show_default=True)
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=None)
def simulate(spec, strategy, out):
    """Run one mission from SPEC (a file or a bundled experiment name)."""
    try:
        exp = load_spec(spec)
    except SpecError as exc:
        _fail(str(exc))
    out = exp.resolve_output(out)
    result = run_mission(exp.mission(strategy))
    write_mission(result, out, strategy)
    m = result.metrics
    click.echo(f"{strategy}: {m['n_tracks']} tracks, r_adpt {result.r_adpt_values}, "
               f"uncovered {m['uncovered_fraction']:.4%} -> {out}")
    if result.aborted:
        _fail(f"mission aborted: {result.abort_reason}", EXIT_ABORT)


@main.command()
@click.argument("grid_file", type=click.Path(dir_okay=False, path_type=Path))
@click.option("-k", "--components", "k", type=int, default=2, show_default=True)
@click.option("--margin", type=int, default=0, show_default=True,
              help="Perimeter cells excluded from the analysis.")
@click.option("--bins", type=int, default=20, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def analyze(grid_file, k, margin, bins, seed):
    """Coverage, histogram and mixture statistics for an exported grid."""
    try:
        grid = read_grid(grid_file)
    except GridFormatError as exc:
        _fail(f"{grid_file}: {exc}")
    except OSError as exc:
        _fail(f"cannot read {grid_file}: {exc.strerror}")
    try:
        click.echo(analysis_report(grid, k, margin, bins, seed), nl=False)
    except (TrackspaceError, ValueError) as exc:
        _fail(str(exc))


@main.command()
@click.argument("spec")
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=None)
def experiment(spec, out):
    """Run the control and adaptive missions of SPEC and compare them."""
    try:
        exp = load_spec(spec)
    except SpecError as exc:
        _fail(str(exc))
    out = exp.resolve_output(out)
    control = run_mission(exp.mission("predefined"))
    adaptive = run_mission(exp.mission("adaptive"))
    write_mission(control, out, "control")
    write_mission(adaptive, out, "adaptive")

    if adaptive.aborted:
        write_atomic(out / "ABORTED", adaptive.abort_reason + "\n")
        _fail(f"adaptive mission aborted after {len(adaptive.plan)} tracks: "
              f"{adaptive.abort_reason}; partial artifacts in {out}", EXIT_ABORT)

    cmp = compare_missions(control, adaptive, exp.gmm_components,
                           exp.perimeter_margin_cells, exp.seed)
    header = (f"# {exp.name}: r_planned {exp.sensor.r_planned_m:g} m, r_true {exp.sensor.r_true_m:g} m, "
              f"adaptive r_adpt history {[f'{r:g}' for r in adaptive.r_adpt_values]}\n")
    write_atomic(out / "comparison.txt", header + cmp.table())
    write_atomic(out / "comparison.kv", cmp.key_values())
    click.echo(header + cmp.table(), nl=False)


if __name__ == "__main__":
    main()
