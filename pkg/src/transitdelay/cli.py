"""Command line entry point."""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .bench import HarnessConfig, MODES, bench_queries, ordering_violations, random_queries, simulate
from .delays import DelayScenario, DelayStream, apply_updates, generate_delay_stream
from .mr import mr_query
from .reporting import write_bench_report, write_simulation_report
from .shortcuts import ShortcutOptions, ShortcutSet, compute_shortcuts
from .synthetic import SyntheticParams, gen_synthetic_network
from .tb import tb_query
from .timetable import load_network, save_network
from .updates import build_snapshot


class ClockTime(click.ParamType):
    """Seconds, or HH:MM[:SS]."""

    name = "time"

    def convert(self, value, param, ctx):
        if isinstance(value, int):
            return value
        try:
            parts = [int(p) for p in str(value).split(":")]
        except ValueError:
            self.fail(f"{value!r} is neither seconds nor HH:MM[:SS]", param, ctx)
        if len(parts) == 1:
            return parts[0]
        if len(parts) in (2, 3):
            h, m, s = (parts + [0])[:3]
            return h * 3600 + m * 60 + s
        self.fail(f"{value!r} is neither seconds nor HH:MM[:SS]", param, ctx)


TIME = ClockTime()


def _headway(value: str) -> tuple[int, float]:
    seconds, _, weight = value.partition(":")
    return int(seconds), float(weight or 1.0)


@click.group()
def main() -> None:
    """Delay-robust transit routing: network and delay generation, shortcut builds, simulation and benchmarks."""


@main.command("gen-network")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--stops", default=120, show_default=True)
@click.option("--routes", default=12, show_default=True)
@click.option("--headway", "headways", multiple=True, default=("300:1", "600:1"), show_default=True,
              help="SECONDS[:WEIGHT]; repeat for a distribution")
@click.option("--extra-vertices", default=0, show_default=True)
@click.option("--walk-radius", default=450.0, show_default=True)
@click.option("--seed", default=0, show_default=True)
def gen_network(out_dir, stops, routes, headways, extra_vertices, walk_radius, seed):
    """Write a synthetic network as CSV files."""
    params = SyntheticParams(stops=stops, routes=routes, headways=tuple(_headway(h) for h in headways),
                             extra_vertices=extra_vertices, walk_radius=walk_radius, seed=seed)
    network = gen_synthetic_network(params)
    save_network(network, out_dir)
    click.echo(f"stops={network.stop_count} vertices={network.vertex_count} trips={network.trip_count} "
               f"events={network.event_count} transfers={network.graph.edge_count}")


@main.command("gen-delays")
@click.option("--network", "network_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--window-start", default="12:00", type=TIME, show_default=True)
@click.option("--window-end", default="13:00", type=TIME, show_default=True)
@click.option("--seed", default=1, show_default=True)
def gen_delays(network_dir, out, window_start, window_end, seed):
    """Generate a synthetic delay update stream."""
    network = load_network(network_dir)
    stream = generate_delay_stream(network, window_start, window_end, seed)
    stream.save(network, out)
    click.echo(f"updates={len(stream)} digest={stream.digest(network)}")


@main.command("build-shortcuts")
@click.option("--network", "network_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--delta", required=True, type=int, help="delay limit in seconds")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--workers", default=1, show_default=True)
@click.option("--no-time-travel-pruning", is_flag=True)
@click.option("--text", is_flag=True, help="also write a readable .txt dump")
def build_shortcuts(network_dir, delta, out, workers, no_time_travel_pruning, text):
    """Compute the shortcut set for one delay limit."""
    network = load_network(network_dir)
    options = ShortcutOptions(time_travel_pruning=not no_time_travel_pruning, workers=workers)
    shortcuts = compute_shortcuts(network, delta, options)
    shortcuts.save(out)
    if text:
        Path(out).with_suffix(".txt").write_text(shortcuts.to_text(), encoding="utf-8")
    kept = sum(1 for s in shortcuts if s.kept)
    click.echo(f"shortcuts={len(shortcuts)} with_nonempty_interval={kept}")


def _config(config_path, overrides: dict) -> HarnessConfig:
    data = {}
    if config_path:
        data = HarnessConfig.load(config_path).__dict__.copy()
    data.update({k: v for k, v in overrides.items() if v not in (None, ())})
    return HarnessConfig.from_dict(data)


@main.command("simulate")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--network", "network_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--delays", type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", "modes", multiple=True, type=click.Choice(MODES), help="repeatable")
@click.option("--delta", "deltas", multiple=True, type=int, help="repeatable")
@click.option("--queries", type=int)
@click.option("--seed", type=int)
@click.option("--window-start", type=TIME)
@click.option("--window-end", type=TIME)
@click.option("--out", "out_dir", type=click.Path(file_okay=False))
@click.option("--delimiter", default=",", show_default=True)
@click.option("--no-figures", is_flag=True)
@click.option("--check", is_flag=True, help="exit nonzero unless error rates are ordered as expected")
def simulate_cmd(config_path, network_dir, delays, modes, deltas, queries, seed, window_start, window_end,
                 out_dir, delimiter, no_figures, check):
    """Replay a delay stream with interleaved update phases and queries."""
    config = _config(config_path, dict(network=network_dir, delay_stream=delays, modes=list(modes) or None,
                                       deltas=list(deltas) or None, query_count=queries, seed=seed,
                                       window_start=window_start, window_end=window_end, output_dir=out_dir))
    report = simulate(config)
    for path in write_simulation_report(report, config.output_dir, delimiter, figures=not no_figures):
        click.echo(f"wrote {path}")
    for r in report.rows:
        click.echo(delimiter.join(str(x) for x in (r.max_delay, r.mode, r.clock, f"{r.query_error_rate:.4f}",
                                                   f"{r.journey_error_rate:.4f}", r.queries)))
    if check:
        failures = ordering_violations(report)
        for line in failures:
            click.echo(f"CHECK FAILED: {line}", err=True)
        sys.exit(1 if failures else 0)


@main.command("query")
@click.option("--network", "network_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--shortcuts", "shortcut_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--delays", type=click.Path(exists=True, dir_okay=False))
@click.option("--source", required=True, type=int)
@click.option("--target", required=True, type=int)
@click.option("--departure", required=True, type=TIME)
@click.option("--execution-time", type=TIME, help="updates revealed after this are ignored (default: departure)")
@click.option("--engine", type=click.Choice(["tb", "mr", "both"]), default="both", show_default=True)
def query_cmd(network_dir, shortcut_path, delays, source, target, departure, execution_time, engine):
    """Answer one query and print the Pareto-optimal journeys."""
    network = load_network(network_dir)
    shortcuts = ShortcutSet.load(shortcut_path, network)
    scenario = DelayScenario.punctual(network.event_count)
    at = departure if execution_time is None else execution_time
    if at > departure:
        raise click.BadParameter("execution time must not be after the departure time")
    if delays:
        stream = DelayStream.load(network, delays)
        scenario = apply_updates(scenario, [u for u in stream if u.reveal_time <= at], network)
    snapshot = build_snapshot(network, shortcuts, scenario)
    results = []
    if engine in ("tb", "both"):
        results.append(("tb", tb_query(snapshot.tb, source, target, departure)))
    if engine in ("mr", "both"):
        results.append(("mr", mr_query(snapshot.view, source, target, departure)))
    for name, result in results:
        if not result.labels:
            click.echo(f"{name}: unreachable")
        for label, journey in zip(result.labels, result.journeys):
            legs = " ".join(f"{network.trip_names[l.trip]}[{l.enter}->{l.exit}]" for l in journey.legs) or "walk"
            click.echo(f"{name}: arrival={label.arrival} trips={label.trips} {legs}")


@main.command("bench")
@click.option("--network", "network_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--delta", "deltas", multiple=True, type=int, help="repeatable")
@click.option("--queries", type=int)
@click.option("--seed", type=int)
@click.option("--out", "out_dir", type=click.Path(file_okay=False))
@click.option("--delimiter", default=",", show_default=True)
@click.option("--no-figures", is_flag=True)
@click.option("--check", is_flag=True, help="exit nonzero if TB is slower on average or answers differ")
def bench_cmd(network_dir, config_path, deltas, queries, seed, out_dir, delimiter, no_figures, check):
    """Time trip-based and MR queries on identical random queries."""
    config = _config(config_path, dict(network=network_dir, deltas=list(deltas) or None, bench_queries=queries,
                                       seed=seed, output_dir=out_dir))
    network = config.load_network()
    query_list = random_queries(network, config.bench_queries, config.window_start, config.window_end, config.seed)
    results = []
    for delta in config.deltas:
        snapshot = build_snapshot(network, compute_shortcuts(network, delta))
        result = bench_queries(snapshot, query_list, config.max_rounds)
        results.append(result)
        click.echo(f"delta={delta} tb_ms={result.mean_tb_ms:.3f} mr_ms={result.mean_mr_ms:.3f} "
                   f"ratio={result.speedup:.2f} mismatches={result.mismatches}")
    for path in write_bench_report(results, config.output_dir, delimiter, figures=not no_figures):
        click.echo(f"wrote {path}")
    if check and any(r.mean_tb_ms > r.mean_mr_ms or r.mismatches for r in results):
        sys.exit(1)


if __name__ == "__main__":
    main()
