"""Update phases: apply delay batches, filter shortcuts and search for replacement shortcuts."""

from __future__ import annotations

import time
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .delays import DelayScenario, DelayUpdate, apply_updates
from .mr import ForwardSearch, TimetableView, backward_mr
from .shortcuts import ShortcutSet
from .tb import TBData
from .timetable import Network
from .transfers import INFINITY, StopDistanceIndex


@dataclass
class PhaseMetrics:
    updates: int = 0
    infeasible: int = 0
    out_of_interval: int = 0
    replacements_added: int = 0
    replacement_searches: int = 0
    update_seconds: float = 0.0
    search_seconds: float = 0.0
    merge_seconds: float = 0.0

    @property
    def total_seconds(self) -> float:
        return self.update_seconds + self.search_seconds + self.merge_seconds


@dataclass
class QueryDataSnapshot:
    """Immutable query state produced by one update phase."""

    version: int
    network: Network
    shortcuts: ShortcutSet
    scenario: DelayScenario
    view: TimetableView
    tb: TBData
    replacements: dict[tuple[int, int], int]  # (origin, destination) -> transfer time
    built_at: int = 0
    metrics: PhaseMetrics = field(default_factory=PhaseMetrics)

    @property
    def filtered_count(self) -> int:
        return self.tb.shortcut_count


def filter_shortcuts(
    network: Network,
    shortcuts: ShortcutSet,
    scenario: DelayScenario,
    view: TimetableView,
    replacements: dict[tuple[int, int], int],
    metrics: PhaseMetrics | None = None,
) -> dict[int, list[tuple[int, int]]]:
    """Outgoing shortcuts per origin event that are feasible and, unless replacements, within their interval."""
    arrival, departure = view.arrival, view.departure
    adjacency: dict[int, dict[int, int]] = defaultdict(dict)
    infeasible = outside = 0
    for s in shortcuts:
        if arrival[s.origin] + s.transfer_time > departure[s.destination]:
            infeasible += 1
        elif not s.covers(scenario.arrival_delay[s.origin]):
            outside += 1
        else:
            adjacency[s.origin][s.destination] = s.transfer_time
    for (o, d), transfer in replacements.items():
        if arrival[o] + transfer <= departure[d]:
            old = adjacency[o].get(d)
            adjacency[o][d] = transfer if old is None else min(old, transfer)
    if metrics is not None:
        metrics.infeasible = infeasible
        metrics.out_of_interval = outside
    return {o: sorted(edges.items()) for o, edges in adjacency.items()}


def build_snapshot(
    network: Network,
    shortcuts: ShortcutSet,
    scenario: DelayScenario | None = None,
    replacements: dict[tuple[int, int], int] | None = None,
    version: int = 0,
    built_at: int = 0,
    metrics: PhaseMetrics | None = None,
    distances: StopDistanceIndex | None = None,
) -> QueryDataSnapshot:
    scenario = scenario or DelayScenario.punctual(network.event_count)
    replacements = dict(replacements or {})
    metrics = metrics or PhaseMetrics()
    view = TimetableView.for_scenario(network, scenario)
    adjacency = filter_shortcuts(network, shortcuts, scenario, view, replacements, metrics)
    return QueryDataSnapshot(version, network, shortcuts, scenario, view, TBData(view, adjacency, distances),
                             replacements, built_at, metrics)


def basic_update(snapshot: QueryDataSnapshot, batch: Sequence[DelayUpdate], built_at: int | None = None) -> QueryDataSnapshot:
    """New snapshot for the scenario after `batch`; the input snapshot is left untouched."""
    started = time.perf_counter()
    metrics = PhaseMetrics(updates=len(batch))
    scenario = apply_updates(snapshot.scenario, batch, snapshot.network)
    new = build_snapshot(snapshot.network, snapshot.shortcuts, scenario, snapshot.replacements,
                         snapshot.version + 1, snapshot.built_at if built_at is None else built_at, metrics,
                         snapshot.tb.distances)
    metrics.update_seconds = time.perf_counter() - started
    return new


# -- replacement search -----------------------------------------------------------


@dataclass
class ReplacementRequest:
    source_events: list[int]
    bounds: dict[int, int]  # target stop -> latest acceptable arrival

    def merge(self, other: "ReplacementRequest") -> "ReplacementRequest":
        bounds = dict(self.bounds)
        for v, t in other.bounds.items():
            bounds[v] = max(bounds.get(v, t), t)
        return ReplacementRequest(sorted(set(self.source_events) | set(other.source_events)), bounds)


def find_earliest_trip(network: Network, view: TimetableView, trip: int, index: int, ready: int,
                       same_sequence: dict[tuple[int, ...], list[int]]) -> int | None:
    """Trip with the same stop sequence that departs at `index` no earlier than `ready`, earliest first."""
    best, best_dep = None, INFINITY
    for other in same_sequence[network.trip_stops[trip]]:
        d = view.departure[network.trip_first[other] + index]
        if ready <= d < best_dep:
            best, best_dep = other, d
    return best


def replacement_request(
    network: Network,
    view: TimetableView,
    origin: int,
    infeasible_destinations: Iterable[int],
    distances: StopDistanceIndex,
    same_sequence: dict[tuple[int, ...], list[int]],
) -> ReplacementRequest | None:
    destinations = sorted(set(infeasible_destinations))
    if not destinations:
        return None
    stops = network.event_stop
    trip = network.event_trip[origin]
    sources = list(range(network.trip_first[trip], origin))
    if not sources:
        return None
    origin_row = distances.from_vertex(stops[origin])
    origin_arrival = view.arrival[origin]
    targets = set()
    for d in destinations:
        end = network.trip_first[network.event_trip[d]] + network.trip_len[network.event_trip[d]]
        targets.update(stops[e] for e in range(d + 1, end))
    bounds = {v: origin_arrival + origin_row.get(v, INFINITY) for v in targets}
    for d in destinations:
        t = network.event_trip[d]
        i = network.event_index[d]
        ready = origin_arrival + origin_row.get(stops[d], INFINITY)
        if ready >= INFINITY:
            continue
        later = find_earliest_trip(network, view, t, i, ready, same_sequence)
        if later is None:
            continue
        first = network.trip_first[later]
        for e in range(first + i + 1, first + network.trip_len[later]):
            if view.arrival[e] < bounds[stops[e]]:
                bounds[stops[e]] = view.arrival[e]
    bounds = {v: t for v, t in bounds.items() if t < INFINITY}
    if not bounds:
        return None
    return ReplacementRequest(sources, bounds)


def find_replacements(view: TimetableView, request: ReplacementRequest, prune: bool = True) -> dict[tuple[int, int], int]:
    """Intermediate transfers of two-trip journeys from the source events that meet the target bounds."""
    network = view.network
    stops = network.event_stop
    departure = view.departure
    min_time = min(departure[s] for s in request.source_events)
    latest = backward_mr(view, request.bounds, min_time, max_rounds=2) if prune else None
    out: dict[tuple[int, int], int] = {}
    for s in request.source_events:
        check = None
        if latest is not None:
            def check(v: int, n: int, t: int, latest=latest) -> bool:
                return n <= 2 and t > latest[2 - n][v]
        search = ForwardSearch(view, max_rounds=2, prune=check).run([(stops[s], departure[s])])
        if len(search.parents) < 3:
            continue
        for v, bound in request.bounds.items():
            if search.best[v] > bound or v not in search.parents[2]:
                continue
            journey = search.journey(v, 2)
            if len(journey.legs) != 2:
                continue
            first, second = journey.legs
            o = network.trip_first[first.trip] + first.exit
            d = network.trip_first[second.trip] + second.enter
            transfer = journey.transfers[1].duration
            if (o, d) not in out or transfer < out[(o, d)]:
                out[(o, d)] = transfer
    return out


def _same_sequence_trips(network: Network) -> dict[tuple[int, ...], list[int]]:
    groups: dict[tuple[int, ...], list[int]] = defaultdict(list)
    for t in range(network.trip_count):
        groups[network.trip_stops[t]].append(t)
    return groups


def infeasible_destinations(snapshot: QueryDataSnapshot, origin: int,
                            by_origin: dict | None = None) -> list[int]:
    view = snapshot.view
    by_origin = by_origin if by_origin is not None else snapshot.shortcuts.adjacency()
    return [s.destination for s in by_origin.get(origin, ())
            if view.arrival[origin] + s.transfer_time > view.departure[s.destination]]


def replacement_search_for_origin(snapshot: QueryDataSnapshot, origin: int,
                                  distances: StopDistanceIndex | None = None) -> dict[tuple[int, int], int]:
    """Replacement shortcuts for one delayed origin event of the snapshot's scenario."""
    network = snapshot.network
    request = replacement_request(network, snapshot.view, origin, infeasible_destinations(snapshot, origin),
                                  distances or snapshot.tb.distances, _same_sequence_trips(network))
    return {} if request is None else find_replacements(snapshot.view, request)


def delayed_events(network: Network, before: DelayScenario, after: DelayScenario) -> list[int]:
    return [e for e in range(network.event_count) if after.arrival_delay[e] > before.arrival_delay[e]]


def advanced_update(
    snapshot: QueryDataSnapshot,
    batch: Sequence[DelayUpdate],
    built_at: int | None = None,
    distances: StopDistanceIndex | None = None,
    batch_per_trip: bool = True,
) -> QueryDataSnapshot:
    """Basic update followed by a replacement search for origins whose arrival delay grew."""
    new = basic_update(snapshot, batch, built_at)
    metrics = new.metrics
    started = time.perf_counter()
    network = new.network
    distances = distances or new.tb.distances
    view = new.view
    same_sequence = _same_sequence_trips(network)
    by_origin = new.shortcuts.adjacency()
    requests: dict[int, ReplacementRequest] = {}
    for o in delayed_events(network, snapshot.scenario, new.scenario):
        request = replacement_request(network, view, o, infeasible_destinations(new, o, by_origin),
                                      distances, same_sequence)
        if request is None:
            continue
        key = network.event_trip[o] if batch_per_trip else o
        requests[key] = requests[key].merge(request) if key in requests else request
    found: dict[tuple[int, int], int] = {}
    for key in sorted(requests):
        metrics.replacement_searches += 1
        for pair, transfer in find_replacements(view, requests[key]).items():
            if pair not in found or transfer < found[pair]:
                found[pair] = transfer
    metrics.search_seconds = time.perf_counter() - started

    started = time.perf_counter()
    replacements = dict(new.replacements)
    added = 0
    for pair, transfer in found.items():
        if pair not in replacements and pair not in new.shortcuts:
            added += 1
        replacements[pair] = min(transfer, replacements.get(pair, transfer))
    metrics.replacements_added = added
    adjacency = filter_shortcuts(network, new.shortcuts, new.scenario, view, replacements)
    merged = QueryDataSnapshot(new.version, network, new.shortcuts, new.scenario, view,
                               TBData(view, adjacency, new.tb.distances), replacements, new.built_at, metrics)
    metrics.merge_seconds = time.perf_counter() - started
    return merged
