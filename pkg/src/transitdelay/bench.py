"""Simulation protocol, affected-query mining and query timing benchmarks."""

from __future__ import annotations

import hashlib
import json
import random
import statistics
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterator, Sequence

import yaml

from .delays import DelayScenario, DelayStream, apply_updates, generate_delay_stream
from .journeys import ArrayTimes, PartialJourney, arrival_time, feasible
from .mr import TimetableView, mr_query
from .shortcuts import ShortcutSet, compute_shortcuts
from .synthetic import SyntheticParams, gen_synthetic_network
from .tb import tb_query
from .timetable import Network, load_network
from .transfers import StopDistanceIndex
from .updates import QueryDataSnapshot, advanced_update, basic_update, build_snapshot

MODES = ("none", "basic", "advanced")


# -- configuration --------------------------------------------------------------


@dataclass
class HarnessConfig:
    network: str | None = None                 # directory with the CSV interchange files; None = synthetic
    synthetic: dict = field(default_factory=dict)  # SyntheticParams overrides
    deltas: list[int] = field(default_factory=lambda: [60, 300])
    window_start: int = 12 * 3600
    window_end: int = 13 * 3600
    query_count: int = 500
    seed: int = 1
    modes: list[str] = field(default_factory=lambda: list(MODES))
    mine_affected: bool = True
    mining_attempts_factor: int = 200
    clock_factor: float = 1.0                  # simulated seconds per measured second of update work
    phase_seconds: float | None = None         # fixed simulated phase duration; overrides measurement
    max_rounds: int = 8
    bench_queries: int = 1000
    output_dir: str = "report"
    delay_stream: str | None = None            # stream file; generated from the seed when absent

    @classmethod
    def load(cls, path: str | Path) -> "HarnessConfig":
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data: dict) -> "HarnessConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        config = cls(**data)
        bad = set(config.modes) - set(MODES)
        if bad:
            raise ValueError(f"unknown update modes: {', '.join(sorted(bad))}")
        if config.window_start >= config.window_end:
            raise ValueError("window start must precede window end")
        return config

    def load_network(self) -> Network:
        if self.network:
            return load_network(self.network)
        return gen_synthetic_network(SyntheticParams(**self.synthetic))

    def load_stream(self, network: Network) -> DelayStream:
        if self.delay_stream:
            return DelayStream.load(network, self.delay_stream)
        return generate_delay_stream(network, self.window_start, self.window_end, self.seed)


@dataclass(frozen=True)
class Query:
    source: int
    target: int
    departure: int

    @property
    def execution_time(self) -> int:
        return self.departure


# -- scenario timeline ----------------------------------------------------------------


class ScenarioTimeline:
    """Scenario current at a given time, for increasing times."""

    def __init__(self, network: Network, stream: DelayStream):
        self.network = network
        self.updates = list(stream)
        self.position = 0
        self.scenario = DelayScenario.punctual(network.event_count)
        self.view = TimetableView(network)

    def advance(self, t: int) -> TimetableView:
        batch = []
        while self.position < len(self.updates) and self.updates[self.position].reveal_time <= t:
            batch.append(self.updates[self.position])
            self.position += 1
        if batch:
            self.scenario = apply_updates(self.scenario, batch, self.network)
            self.view = TimetableView.for_scenario(self.network, self.scenario)
        return self.view


def evaluate(network: Network, journey: PartialJourney, view: TimetableView, departure: int) -> int | None:
    """Arrival of `journey` under the view's times, or None if it cannot be taken."""
    times = ArrayTimes(view.arrival, view.departure)
    if not feasible(network, journey, times, departure):
        return None
    return arrival_time(network, journey, times, departure)


def is_affected(network: Network, query: Query, base: TimetableView, current: TimetableView) -> bool:
    """Some undelayed Pareto-optimal journey is infeasible or arrives later under the current scenario."""
    planned = mr_query(base, query.source, query.target, query.departure)
    for label, journey in zip(planned.labels, planned.journeys):
        actual = evaluate(network, journey, current, query.departure)
        if actual is None or actual > label.arrival:
            return True
    return False


def random_query(rng: random.Random, network: Network, window_start: int, window_end: int) -> Query:
    return Query(rng.randrange(network.vertex_count), rng.randrange(network.vertex_count),
                 rng.randint(window_start, window_end))


def mine_affected_queries(network: Network, stream: DelayStream, count: int, window_start: int,
                          window_end: int, seed: int, max_attempts: int | None = None) -> tuple[list[Query], int]:
    """Random queries kept only if affected; returns them sorted by execution time plus the attempts used.

    Candidates are drawn in batches; each batch is checked in time order so the current
    scenario can be advanced incrementally, then accepted in drawing order.
    """
    rng = random.Random(seed)
    max_attempts = count * 200 if max_attempts is None else max_attempts
    base = TimetableView(network)
    kept: list[Query] = []
    attempts = 0
    while len(kept) < count and attempts < max_attempts:
        size = min(max(count, 64), max_attempts - attempts)
        batch = [random_query(rng, network, window_start, window_end) for _ in range(size)]
        timeline = ScenarioTimeline(network, stream)
        flags = {}
        for k in sorted(range(size), key=lambda k: batch[k].departure):
            flags[k] = is_affected(network, batch[k], base, timeline.advance(batch[k].execution_time))
        for k in range(size):
            attempts += 1
            if flags[k]:
                kept.append(batch[k])
                if len(kept) == count:
                    break
    return sorted(kept, key=lambda q: (q.departure, q.source, q.target)), attempts


# -- simulation -----------------------------------------------------------------------


@dataclass
class Phase:
    start: float
    finish: float
    snapshot: QueryDataSnapshot


class UpdateClock:
    """Back-to-back update phases; each takes the updates buffered since the previous phase started."""

    def __init__(self, base: QueryDataSnapshot, stream: DelayStream, mode: str, start: int,
                 clock_factor: float = 1.0, phase_seconds: float | None = None):
        self.mode = mode
        self.updates = list(stream)
        self.clock_factor = clock_factor
        self.phase_seconds = phase_seconds
        self.position = 0
        self.phases: list[Phase] = []
        self.metrics = []
        # the data at the window start is ready when the window opens
        initial = [] if mode == "none" else self._take(start)
        snapshot = self._run(base, initial, start) if initial else base
        self.phases.append(Phase(start, start, snapshot))

    def _take(self, t: float) -> list:
        batch = []
        while self.position < len(self.updates) and self.updates[self.position].reveal_time <= t:
            batch.append(self.updates[self.position])
            self.position += 1
        return batch

    def _run(self, snapshot: QueryDataSnapshot, batch: list, start: float) -> QueryDataSnapshot:
        update = advanced_update if self.mode == "advanced" else basic_update
        new = update(snapshot, batch, built_at=int(start))
        self.metrics.append(new.metrics)
        return new

    def _next_phase(self) -> bool:
        if self.mode == "none" or self.position >= len(self.updates):
            return False
        last = self.phases[-1]
        start = max(last.finish, self.updates[self.position].reveal_time)
        batch = self._take(start)
        began = time.perf_counter()
        snapshot = self._run(last.snapshot, batch, start)
        measured = time.perf_counter() - began
        duration = self.phase_seconds if self.phase_seconds is not None else measured * self.clock_factor
        self.phases.append(Phase(start, start + duration, snapshot))
        return True

    def snapshots_at(self, t: float) -> tuple[QueryDataSnapshot, QueryDataSnapshot]:
        """(real, hypothetical): last phase finished by `t` and last phase started by `t`."""
        while (self.mode != "none" and self.position < len(self.updates)
               and max(self.phases[-1].finish, self.updates[self.position].reveal_time) <= t):
            self._next_phase()
        # drop phases nobody can ask for any more; queries arrive in time order
        while len(self.phases) > 2 and self.phases[1].finish <= t:
            self.phases.pop(0)
        hypothetical = self.phases[-1].snapshot
        real = next(p.snapshot for p in reversed(self.phases) if p.finish <= t)
        return real, hypothetical


@dataclass
class QueryOutcome:
    optimal: int
    missing: int
    returned: int
    infeasible: int
    detours: list[float]

    @property
    def failed(self) -> bool:
        return self.missing > 0


def compare_with_reference(network: Network, query: Query, reference, result, current: TimetableView) -> QueryOutcome:
    """Score one engine answer against the exact Pareto set for the current scenario."""
    actual = []
    infeasible = 0
    for journey in result.journeys:
        a = evaluate(network, journey, current, query.departure)
        if a is None:
            infeasible += 1
        else:
            actual.append((a, journey.trips))
    missing = 0
    for label in reference.labels:
        if not any(a <= label.arrival and n <= label.trips for a, n in actual):
            missing += 1
    detours = []
    for a, n in actual:
        optimum = min((l.arrival for l in reference.labels if l.trips <= n), default=None)
        if optimum is not None and a > optimum and optimum > query.departure:
            detours.append((a - optimum) / (optimum - query.departure))
    return QueryOutcome(len(reference.labels), missing, len(result.journeys), infeasible, detours)


@dataclass
class SimulationRow:
    max_delay: int
    mode: str
    clock: str                       # "real" or "hypothetical"
    queries: int
    failed_queries: int
    optimal_journeys: int
    missing_journeys: int
    returned_journeys: int
    infeasible_journeys: int
    query_error_rate: float
    journey_error_rate: float
    infeasible_share: float
    median_detour: float | None
    full_shortcuts: int
    infeasible_shortcuts: int
    out_of_interval_shortcuts: int
    filtered_shortcuts: int
    replacement_shortcuts: int
    update_phases: int
    mean_tb_ms: float = 0.0
    mean_mr_ms: float = 0.0
    mean_update_s: float = 0.0
    mean_search_s: float = 0.0
    mean_merge_s: float = 0.0

    TIMING = ("mean_tb_ms", "mean_mr_ms", "mean_update_s", "mean_search_s", "mean_merge_s")


def _aggregate(outcomes: list[QueryOutcome]) -> dict:
    optimal = sum(o.optimal for o in outcomes)
    missing = sum(o.missing for o in outcomes)
    returned = sum(o.returned for o in outcomes)
    infeasible = sum(o.infeasible for o in outcomes)
    detours = [d for o in outcomes for d in o.detours]
    failed = sum(o.failed for o in outcomes)
    return dict(
        queries=len(outcomes), failed_queries=failed, optimal_journeys=optimal, missing_journeys=missing,
        returned_journeys=returned, infeasible_journeys=infeasible,
        query_error_rate=failed / len(outcomes) if outcomes else 0.0,
        journey_error_rate=missing / optimal if optimal else 0.0,
        infeasible_share=infeasible / returned if returned else 0.0,
        median_detour=statistics.median(detours) if detours else None,
    )


@dataclass
class SimulationReport:
    rows: list[SimulationRow]
    network_hash: str
    stream_digest: str
    affected_attempts: int
    query_count: int

    def deterministic_digest(self) -> str:
        """Hash of everything except wall-clock timing columns."""
        payload = [{k: v for k, v in asdict(r).items() if k not in SimulationRow.TIMING} for r in self.rows]
        blob = json.dumps([self.network_hash, self.stream_digest, self.affected_attempts, payload], sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()

    def row(self, max_delay: int, mode: str, clock: str = "real") -> SimulationRow:
        return next(r for r in self.rows if (r.max_delay, r.mode, r.clock) == (max_delay, mode, clock))


def ordering_violations(report: SimulationReport) -> list[str]:
    """Violations of advanced <= basic <= none and hypothetical <= real."""
    failures = []
    rank = {"advanced": 0, "basic": 1, "none": 2}
    for clock in ("real", "hypothetical"):
        for delta in sorted({r.max_delay for r in report.rows}):
            rows = sorted((r for r in report.rows if r.max_delay == delta and r.clock == clock), key=lambda r: rank[r.mode])
            for a, b in zip(rows, rows[1:]):
                if a.journey_error_rate > b.journey_error_rate:
                    failures.append(f"{clock} delta={delta}: {a.mode} {a.journey_error_rate:.4f} > {b.mode} {b.journey_error_rate:.4f}")
    for r in report.rows:
        if r.clock == "hypothetical":
            real = report.row(r.max_delay, r.mode, "real")
            if r.journey_error_rate > real.journey_error_rate:
                failures.append(f"delta={r.max_delay} {r.mode}: hypothetical above real")
    return failures


def prepare_queries(config: HarnessConfig, network: Network, stream: DelayStream) -> tuple[list[Query], int]:
    if config.mine_affected:
        return mine_affected_queries(network, stream, config.query_count, config.window_start, config.window_end,
                                     config.seed, config.query_count * config.mining_attempts_factor)
    rng = random.Random(config.seed)
    queries = [random_query(rng, network, config.window_start, config.window_end) for _ in range(config.query_count)]
    return sorted(queries, key=lambda q: (q.departure, q.source, q.target)), config.query_count


def simulate_mode(network: Network, shortcuts: ShortcutSet, stream: DelayStream, queries: Sequence[Query],
                  mode: str, config: HarnessConfig, distances: StopDistanceIndex) -> list[SimulationRow]:
    base = build_snapshot(network, shortcuts, distances=distances)
    clock = UpdateClock(base, stream, mode, config.window_start, config.clock_factor, config.phase_seconds)
    timeline = ScenarioTimeline(network, stream)
    outcomes: dict[str, list[QueryOutcome]] = {"real": [], "hypothetical": []}
    tb_seconds = mr_seconds = 0.0
    last = base
    for query in queries:
        t = query.execution_time
        current = timeline.advance(t)
        started = time.perf_counter()
        reference = mr_query(current, query.source, query.target, query.departure, config.max_rounds)
        mr_seconds += time.perf_counter() - started
        real, hypothetical = clock.snapshots_at(t)
        last = hypothetical
        answers = {}
        for name, snapshot in (("real", real), ("hypothetical", hypothetical)):
            key = id(snapshot)
            if key not in answers:
                started = time.perf_counter()
                answers[key] = tb_query(snapshot.tb, query.source, query.target, query.departure, config.max_rounds)
                if name == "real":
                    tb_seconds += time.perf_counter() - started
            outcomes[name].append(compare_with_reference(network, query, reference, answers[key], current))
    phase_metrics = clock.metrics
    # shortcut statistics at the end of the window
    final = clock.snapshots_at(config.window_end)[1] if queries else last
    n = max(1, len(queries))
    rows = []
    for name in ("real", "hypothetical"):
        rows.append(SimulationRow(
            max_delay=shortcuts.max_delay, mode=mode, clock=name, **_aggregate(outcomes[name]),
            full_shortcuts=len(shortcuts), infeasible_shortcuts=final.metrics.infeasible,
            out_of_interval_shortcuts=final.metrics.out_of_interval, filtered_shortcuts=final.filtered_count,
            replacement_shortcuts=len(final.replacements), update_phases=len(phase_metrics),
            mean_tb_ms=1000 * tb_seconds / n, mean_mr_ms=1000 * mr_seconds / n,
            mean_update_s=statistics.fmean([m.update_seconds for m in phase_metrics]) if phase_metrics else 0.0,
            mean_search_s=statistics.fmean([m.search_seconds for m in phase_metrics]) if phase_metrics else 0.0,
            mean_merge_s=statistics.fmean([m.merge_seconds for m in phase_metrics]) if phase_metrics else 0.0,
        ))
    return rows


def simulate(config: HarnessConfig, network: Network | None = None, stream: DelayStream | None = None,
             shortcut_sets: dict[int, ShortcutSet] | None = None) -> SimulationReport:
    network = network or config.load_network()
    stream = stream or config.load_stream(network)
    queries, attempts = prepare_queries(config, network, stream)
    distances = StopDistanceIndex(network.graph)
    rows = []
    for delta in config.deltas:
        shortcuts = (shortcut_sets or {}).get(delta) or compute_shortcuts(network, delta)
        for mode in config.modes:
            rows.extend(simulate_mode(network, shortcuts, stream, queries, mode, config, distances))
    return SimulationReport(rows, network.content_hash(), stream.digest(network), attempts, len(queries))


# -- query benchmark ----------------------------------------------------------------


@dataclass
class BenchResult:
    max_delay: int
    queries: int
    events: int
    shortcuts: int
    mean_tb_ms: float
    median_tb_ms: float
    mean_mr_ms: float
    median_mr_ms: float
    mismatches: int

    @property
    def speedup(self) -> float:
        return self.mean_mr_ms / self.mean_tb_ms if self.mean_tb_ms else float("inf")


def random_queries(network: Network, count: int, window_start: int, window_end: int, seed: int) -> list[Query]:
    rng = random.Random(seed)
    return [random_query(rng, network, window_start, window_end) for _ in range(count)]


def bench_queries(snapshot: QueryDataSnapshot, queries: Sequence[Query], max_rounds: int = 8) -> BenchResult:
    """Times both engines on the same queries against a finished snapshot; endpoint distances are warmed first."""
    for q in queries:
        snapshot.tb.forward_distances(q.source)
        snapshot.tb.backward_distances(q.target)
    tb_times, mr_times = [], []
    mismatches = 0
    for q in queries:
        started = time.perf_counter()
        tb = tb_query(snapshot.tb, q.source, q.target, q.departure, max_rounds, with_journeys=False)
        tb_times.append(time.perf_counter() - started)
        started = time.perf_counter()
        mr = mr_query(snapshot.view, q.source, q.target, q.departure, max_rounds, with_journeys=False)
        mr_times.append(time.perf_counter() - started)
        mismatches += set(tb.labels) != set(mr.labels)
    ms = lambda xs, f: 1000 * f(xs) if xs else 0.0  # noqa: E731
    return BenchResult(snapshot.shortcuts.max_delay, len(queries), snapshot.network.event_count,
                       snapshot.filtered_count, ms(tb_times, statistics.fmean), ms(tb_times, statistics.median),
                       ms(mr_times, statistics.fmean), ms(mr_times, statistics.median), mismatches)


def iter_rows(report: SimulationReport) -> Iterator[dict]:
    for row in report.rows:
        yield asdict(row)
