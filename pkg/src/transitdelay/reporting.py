"""Delimited tables, JSON summaries and figures for simulation and benchmark results."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .bench import BenchResult, SimulationReport, SimulationRow  # noqa: E402


def write_table(rows: Sequence[dict], path: str | Path, delimiter: str = ",") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        if rows:
            writer = csv.DictWriter(handle, fieldnames=list(rows[0]), delimiter=delimiter)
            writer.writeheader()
            writer.writerows(rows)
    return path


def simulation_summary(report: SimulationReport) -> dict:
    return {
        "network_hash": report.network_hash,
        "stream_digest": report.stream_digest,
        "queries": report.query_count,
        "affected_attempts": report.affected_attempts,
        "deterministic_digest": report.deterministic_digest(),
        "rows": [asdict(r) for r in report.rows],
    }


def plot_error_rates(rows: Sequence[SimulationRow], path: str | Path) -> Path:
    deltas = sorted({r.max_delay for r in rows})
    modes = list(dict.fromkeys(r.mode for r in rows))
    fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
    width = 0.8 / max(1, len(modes))
    for ax, clock in zip(axes, ("real", "hypothetical")):
        for k, mode in enumerate(modes):
            values = []
            for d in deltas:
                match = [r for r in rows if (r.max_delay, r.mode, r.clock) == (d, mode, clock)]
                values.append(100 * match[0].journey_error_rate if match else 0.0)
            ax.bar([i + k * width for i in range(len(deltas))], values, width, label=mode)
        ax.set_xticks([i + width * (len(modes) - 1) / 2 for i in range(len(deltas))])
        ax.set_xticklabels([f"{d}s" for d in deltas])
        ax.set_xlabel("delay limit")
        ax.set_title(f"{clock} clock")
    axes[0].set_ylabel("journey error rate [%]")
    axes[0].legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_shortcut_counts(counts: dict[int, dict[str, int]], path: str | Path) -> Path:
    """`counts` maps delay limit to {"full": .., "infeasible": .., "filtered": ..}."""
    deltas = sorted(counts)
    fig, ax = plt.subplots(figsize=(6, 4))
    for key in ("full", "infeasible", "filtered"):
        if all(key in counts[d] for d in deltas):
            ax.plot(deltas, [counts[d][key] for d in deltas], marker="o", label=key)
    ax.set_xlabel("delay limit [s]")
    ax.set_ylabel("shortcuts")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_update_times(rows: Sequence[SimulationRow], path: str | Path) -> Path:
    chosen = [r for r in rows if r.clock == "real" and r.mode != "none"]
    labels = [f"{r.mode}\n{r.max_delay}s" for r in chosen]
    fig, ax = plt.subplots(figsize=(max(4, 1.2 * len(chosen)), 4))
    bottom = [0.0] * len(chosen)
    for key in ("mean_update_s", "mean_search_s", "mean_merge_s"):
        values = [1000 * getattr(r, key) for r in chosen]
        ax.bar(labels, values, bottom=bottom, label=key.removeprefix("mean_").removesuffix("_s"))
        bottom = [b + v for b, v in zip(bottom, values)]
    ax.set_ylabel("mean phase time [ms]")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def write_simulation_report(report: SimulationReport, out_dir: str | Path, delimiter: str = ",",
                            figures: bool = True) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [write_table([asdict(r) for r in report.rows], out / "simulation.csv", delimiter)]
    summary = out / "simulation.json"
    summary.write_text(json.dumps(simulation_summary(report), indent=2, sort_keys=True), encoding="utf-8")
    written.append(summary)
    if figures and report.rows:
        written.append(plot_error_rates(report.rows, out / "error_rates.png"))
        counts = {}
        for r in report.rows:
            if r.clock == "real":
                counts.setdefault(r.max_delay, {"full": r.full_shortcuts, "infeasible": r.infeasible_shortcuts,
                                                "filtered": r.filtered_shortcuts})
        written.append(plot_shortcut_counts(counts, out / "shortcut_counts.png"))
        written.append(plot_update_times(report.rows, out / "update_times.png"))
    return written


def write_bench_report(results: Sequence[BenchResult], out_dir: str | Path, delimiter: str = ",",
                       figures: bool = True) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = [dict(asdict(r), speedup=r.speedup) for r in results]
    written = [write_table(rows, out / "bench.csv", delimiter)]
    summary = out / "bench.json"
    summary.write_text(json.dumps(rows, indent=2, sort_keys=True), encoding="utf-8")
    written.append(summary)
    if figures and results:
        fig, ax = plt.subplots(figsize=(6, 4))
        deltas = [r.max_delay for r in results]
        ax.plot(deltas, [r.mean_tb_ms for r in results], marker="o", label="trip-based")
        ax.plot(deltas, [r.mean_mr_ms for r in results], marker="s", label="MR")
        ax.set_xlabel("delay limit [s]")
        ax.set_ylabel("mean query time [ms]")
        ax.legend()
        fig.tight_layout()
        fig.savefig(out / "query_times.png", dpi=120)
        plt.close(fig)
        written.append(out / "query_times.png")
    return written
