"""Delay-tolerant transfer shortcuts: computation, merging and file formats."""

from __future__ import annotations

import logging
import struct
from bisect import bisect_left
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from heapq import heappop, heappush
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .mr import PrefixLabels, WitnessSearch
from .timetable import Network
from .transfers import INFINITY, DistanceCache

log = logging.getLogger(__name__)


@dataclass(frozen=True, order=True)
class Shortcut:
    """Intermediate transfer from an origin event to a destination event on another trip.

    `min_origin_delay` is a lower bound and `max_origin_delay` the maximum of the
    origin arrival delays for which the shortcut may be needed.
    """

    origin: int
    destination: int
    transfer_time: int
    min_origin_delay: int
    max_origin_delay: int

    @property
    def kept(self) -> bool:
        return self.min_origin_delay <= self.max_origin_delay

    def covers(self, delay: int) -> bool:
        return self.min_origin_delay <= delay <= self.max_origin_delay


class ShortcutSet:
    """Shortcuts keyed by (origin, destination); merging keeps the enclosing interval."""

    MAGIC = b"DUSC"
    HEADER = struct.Struct("<4sH16sqQ")
    RECORD = struct.Struct("<IIiii")

    def __init__(self, max_delay: int, network_hash: str = "", shortcuts: Iterable[Shortcut] = ()):
        self.max_delay = max_delay
        self.network_hash = network_hash
        self._entries: dict[tuple[int, int], Shortcut] = {}
        for shortcut in shortcuts:
            self.add(shortcut)

    def add(self, shortcut: Shortcut) -> None:
        key = (shortcut.origin, shortcut.destination)
        old = self._entries.get(key)
        if old is None:
            self._entries[key] = shortcut
        else:
            self._entries[key] = Shortcut(
                shortcut.origin,
                shortcut.destination,
                min(old.transfer_time, shortcut.transfer_time),
                min(old.min_origin_delay, shortcut.min_origin_delay),
                max(old.max_origin_delay, shortcut.max_origin_delay),
            )

    def merge(self, other: "ShortcutSet") -> "ShortcutSet":
        merged = ShortcutSet(self.max_delay, self.network_hash or other.network_hash, self)
        for shortcut in other:
            merged.add(shortcut)
        return merged

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[Shortcut]:
        return iter(sorted(self._entries.values()))

    def __contains__(self, key: object) -> bool:
        return key in self._entries

    def get(self, origin: int, destination: int) -> Shortcut | None:
        return self._entries.get((origin, destination))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ShortcutSet) and self._entries == other._entries

    def keys(self) -> set[tuple[int, int]]:
        return set(self._entries)

    def adjacency(self) -> dict[int, list[Shortcut]]:
        out: dict[int, list[Shortcut]] = defaultdict(list)
        for shortcut in self:
            out[shortcut.origin].append(shortcut)
        return dict(out)

    # -- files ----------------------------------------------------------------
    def to_bytes(self) -> bytes:
        digest = self.network_hash.encode("ascii")[:16].ljust(16, b"\0")
        parts = [self.HEADER.pack(self.MAGIC, 1, digest, self.max_delay, len(self))]
        parts += [self.RECORD.pack(s.origin, s.destination, s.transfer_time, s.min_origin_delay, s.max_origin_delay) for s in self]
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "ShortcutSet":
        if len(data) < cls.HEADER.size:
            raise ValueError("shortcut file truncated")
        magic, version, digest, max_delay, count = cls.HEADER.unpack_from(data)
        if magic != cls.MAGIC or version != 1:
            raise ValueError("not a shortcut file")
        expected = cls.HEADER.size + count * cls.RECORD.size
        if len(data) != expected:
            raise ValueError(f"shortcut file has {len(data)} bytes, expected {expected}")
        records = cls.RECORD.iter_unpack(data[cls.HEADER.size:])
        return cls(max_delay, digest.rstrip(b"\0").decode("ascii"), (Shortcut(*r) for r in records))

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: str | Path, network: Network | None = None) -> "ShortcutSet":
        shortcuts = cls.from_bytes(Path(path).read_bytes())
        if network is not None and shortcuts.network_hash != network.content_hash():
            raise ValueError(f"{path} was built for a different network")
        return shortcuts

    def to_text(self) -> str:
        lines = [f"# network={self.network_hash} max_delay={self.max_delay} count={len(self)}"]
        lines += [f"{s.origin},{s.destination},{s.transfer_time},{s.min_origin_delay},{s.max_origin_delay}" for s in self]
        return "\n".join(lines) + "\n"


@dataclass
class ShortcutOptions:
    time_travel_pruning: bool = True
    resume_witness_search: bool = True
    workers: int = 1


@dataclass
class TripIndices:
    """Entry, exit and witness index of one trip for one source event."""

    entry: int
    exit: int
    witness: int


def trip_indices_from_labels(arrivals: Sequence[int], departures: Sequence[int],
                             one_trip_witness: Sequence[int], two_trip_witness: Sequence[int]) -> TripIndices:
    """Indices of a trip from per-event witness arrivals at its stops (with one and two trips)."""
    length = len(arrivals)
    w_in = [i for i in range(length) if departures[i] >= one_trip_witness[i]]
    c_out = [i for i in range(length) if arrivals[i] <= two_trip_witness[i]]
    entry = min(w_in) + 1 if w_in else length
    exit_ = max(c_out) if c_out else length
    return TripIndices(entry, exit_, min(entry, exit_))


@dataclass
class DestinationTrace:
    """Intermediate values for one (origin, destination) pair, for inspection and tests."""

    candidate_arrival: int
    join_limit: int
    feasibility_limit: int
    destination_split_limit: int
    target_split_limit: int
    min_origin_delay: int
    time_travel_limit: int
    max_origin_delay: int


class Trace:
    def __init__(self) -> None:
        self.trip_indices: dict[tuple[int, int], TripIndices] = {}  # (source event, trip)
        self.destinations: dict[tuple[int, int], DestinationTrace] = {}  # (origin, destination)


# -- per source stop ------------------------------------------------------------


class SourceStopComputation:
    """All shortcuts whose candidates start at one source stop."""

    def __init__(
        self,
        network: Network,
        max_delay: int,
        source: int,
        options: ShortcutOptions,
        distances: DistanceCache,
        worst_arrival: list[int] | None = None,
        trace: Trace | None = None,
    ):
        self.network = network
        self.max_delay = max_delay
        self.source = source
        self.options = options
        self.distances = distances
        self.trace = trace
        self.source_dist = distances.row(source)
        self.search = WitnessSearch(network, max_delay, source, self.source_dist, worst_arrival,
                                    resume=options.resume_witness_search)
        self.result: list[Shortcut] = []

    def departure_groups(self) -> list[tuple[int, list[int]]]:
        network = self.network
        routes = network.routes
        groups: dict[int, list[int]] = defaultdict(list)
        for r, i in routes.stop_routes[self.source]:
            if i == len(routes.route_stops[r]) - 1:
                continue
            for first in routes.route_firsts[r]:
                groups[network.event_dep[first + i] + self.max_delay].append(first + i)
        return sorted(((t, sorted(events)) for t, events in groups.items()), reverse=True)

    def run(self) -> list[Shortcut]:
        for departure, events in self.departure_groups():
            self.search.run(departure)
            for source_event in events:
                self._source_event(source_event, departure)
        return self.result

    # -- per source event ---------------------------------------------------------
    def _source_event(self, s: int, departure: int) -> None:
        network = self.network
        prefix = self.search.extend(s)
        trip = network.event_trip[s]
        first = network.trip_first[trip]
        end = first + network.trip_len[trip]
        self._indices: dict[int, tuple[list[int], list[int], list[int]]] = {}
        self._prefix = prefix
        self._source_event_id = s
        boardable = s
        if self.options.time_travel_pruning:
            stops, dep, dist = network.event_stop, network.event_dep, self.source_dist
            for e in range(first, s + 1):
                d = dep[e] + (self.max_delay if e == s else 0)
                if dist[stops[e]] < INFINITY and d >= departure + dist[stops[e]]:
                    boardable = e
                    break
        for o in range(s + 1, end):
            self._origin(o, prefix, boardable)

    def _time_travel_labels(self, origin: int, boardable: int, round1: list[int]) -> dict[int, int]:
        """Arrivals with at most one trip that beat `round1` when the first trip may not overtake itself."""
        network = self.network
        stops, arr = network.event_stop, network.event_arr
        anchor = arr[origin]
        labels: dict[int, int] = {}
        heap = []
        for e in range(boardable + 1, origin):
            a = arr[e] + min(self.max_delay, anchor - arr[e])
            v = stops[e]
            if a < round1[v] and a < labels.get(v, INFINITY):
                labels[v] = a
                heap.append((a, v))
        heap.sort()
        out_edges = network.graph.out_edges
        while heap:
            t, v = heappop(heap)
            if t > labels[v]:
                continue
            for w, length in out_edges[v]:
                nt = t + length
                if nt < round1[w] and nt < labels.get(w, INFINITY):
                    labels[w] = nt
                    heappush(heap, (nt, w))
        return labels

    def _candidate_transfers(self, origin: int, round1: list[int]) -> dict[int, int]:
        """Candidate arrival per vertex, with the search pruned where a one-trip witness is strictly earlier."""
        network = self.network
        v0 = network.event_stop[origin]
        labels = {v0: network.event_arr[origin]}
        heap = [(labels[v0], v0)]
        out_edges = network.graph.out_edges
        done = set()
        while heap:
            t, v = heappop(heap)
            if v in done or t > labels[v]:
                continue
            done.add(v)
            if t > round1[v]:
                continue
            for w, length in out_edges[v]:
                nt = t + length
                if nt < labels.get(w, INFINITY):
                    labels[w] = nt
                    heappush(heap, (nt, w))
        return labels

    def _trip_indices(self, route: int) -> tuple[list[int], list[int], list[int]]:
        cached = self._indices.get(route)
        if cached is not None:
            return cached
        network = self.network
        routes = network.routes
        round2 = self._prefix.round2
        entry = self.search.entry_indices(route, self._prefix.entry_overlay)
        stops = routes.route_stops[route]
        length = len(stops)
        exits, witness = [], []
        arr = network.event_arr
        for p, first in enumerate(routes.route_firsts[route]):
            exit_ = 0
            for i in range(length - 1, 0, -1):
                if arr[first + i] <= round2[stops[i]]:
                    exit_ = i
                    break
            exits.append(exit_)
            witness.append(min(entry[p], exit_))
            if self.trace is not None:
                trip = routes.route_trips[route][p]
                self.trace.trip_indices[(self._source_event_id, trip)] = TripIndices(
                    entry[p], exit_ if exit_ else length, min(entry[p], exit_ if exit_ else length))
        cached = self._indices[route] = (entry, exits, witness)
        return cached

    # -- per origin event ---------------------------------------------------------
    def _origin(self, o: int, prefix: PrefixLabels, boardable: int) -> None:
        network = self.network
        delta = self.max_delay
        round1, round2 = prefix.round1, prefix.round2
        stops, arr, dep = network.event_stop, network.event_arr, network.event_dep
        routes = network.routes
        first_trip = network.event_trip[o]

        candidate = self._candidate_transfers(o, round1)
        time_travel = self._time_travel_labels(o, boardable, round1) if self.options.time_travel_pruning else None
        stop_count = network.stop_count
        usable: dict[int, int] = {}
        for v, t in candidate.items():
            if v >= stop_count or t > round1[v]:
                continue
            if time_travel is not None and t > time_travel.get(v, INFINITY):
                continue
            usable[v] = t

        # Routes a candidate can enter, with the first index where that is possible.
        first_index: dict[int, int] = {}
        for v, t in usable.items():
            for r, i in routes.stop_routes[v]:
                if i == len(routes.route_stops[r]) - 1 or first_index.get(r, INFINITY) <= i:
                    continue
                if t <= dep[routes.route_firsts[r][-1] + i] + delta:
                    first_index[r] = i

        registered: dict[int, dict[int, int]] = {}  # trip -> {index: feasibility limit}
        for r in sorted(first_index):
            entry, exits, witness = self._trip_indices(r)
            trips = routes.route_trips[r]
            firsts = routes.route_firsts[r]
            route_stops = routes.route_stops[r]
            last = len(trips) - 1
            for i in range(first_index[r], witness[0]):
                while witness[last] <= i:
                    last -= 1
                t = usable.get(route_stops[i])
                if t is None:
                    continue
                for p in range(last, -1, -1):
                    if trips[p] == first_trip:
                        continue
                    feasibility = min(0, dep[firsts[p] + i] - t) + delta
                    if feasibility < 0:
                        break
                    registered.setdefault(trips[p], {})[i] = feasibility
        if not registered:
            return

        witness2, sigma = self._origin_witnesses(o, candidate, round1, round2)
        origin_row = self.distances.row(stops[o])
        origin_arrival = arr[o]
        for trip in sorted(registered):
            self._scan_second_trip(o, trip, registered[trip], usable, round1, round2, witness2, sigma,
                                   origin_row, origin_arrival)

    def _max_witness_delay(self, event: int, candidate_arrival: int) -> int:
        return max(-1, min(self.network.event_dep[event] - candidate_arrival, self.max_delay))

    def _origin_witnesses(self, o: int, candidate: dict[int, int], round1: list[int], round2: list[int]):
        """Second-round witness arrivals that use the origin event, with their maximum witness delay."""
        network = self.network
        routes = network.routes
        delta = self.max_delay
        stop_count = network.stop_count
        worst = self.search.arrival
        labels: dict[int, int] = {}
        sigma: dict[int, int] = {}
        via_origin = {v: t for v, t in candidate.items() if t < round1[v]}
        first_index: dict[int, int] = {}
        for v in via_origin:
            if v >= stop_count:
                continue
            for r, i in routes.stop_routes[v]:
                if first_index.get(r, INFINITY) > i:
                    first_index[r] = i
        improved = []
        for r in sorted(first_index):
            route_stops = routes.route_stops[r]
            firsts = routes.route_firsts[r]
            deps = routes.route_departures[r]
            count = len(firsts)
            active, active_sigma = count, delta
            last = len(route_stops) - 1
            for i in range(first_index[r], len(route_stops)):
                v = route_stops[i]
                if active < count:
                    a = worst[firsts[active] + i]
                    if a < labels.get(v, round2[v]):
                        labels[v] = a
                        sigma[v] = active_sigma
                        improved.append(v)
                if i < last:
                    c = via_origin.get(v)
                    label = round1[v] if c is None else c
                    p = bisect_left(deps[i], label, 0, active)
                    if p < active:
                        active = p
                        active_sigma = delta if c is None else self._max_witness_delay(firsts[p] + i, c)
        heap = [(labels[v], v) for v in set(improved)]
        heap.sort()
        out_edges = network.graph.out_edges
        while heap:
            t, v = heappop(heap)
            if t > labels[v]:
                continue
            for w, length in out_edges[v]:
                nt = t + length
                if nt < labels.get(w, round2[w]):
                    labels[w] = nt
                    sigma[w] = sigma[v]
                    heappush(heap, (nt, w))
        return labels, sigma

    def _scan_second_trip(self, o, trip, registered, usable, round1, round2, witness2, sigma, origin_row, origin_arrival):
        network = self.network
        delta = self.max_delay
        routes = network.routes
        stops, arr = network.event_stop, network.event_arr
        route = routes.trip_route[trip]
        _, exits, _ = self._trip_indices(route)
        exit_ = exits[routes.trip_pos[trip]]
        first = network.trip_first[trip]

        # d-split limits, ascending over the registered events
        split = {}
        running = 0
        for i in sorted(registered):
            split[i] = running
            running = max(running, self._max_witness_delay(first + i, usable[stops[first + i]]) + 1)

        start = min(registered)
        aggregated = INFINITY
        latest_witness = None
        for i in range(exit_ - 1, start - 1, -1):
            target = first + i + 1
            vt = stops[target]
            at = arr[target]
            if at <= round2[vt]:
                walk = origin_row[vt]
                direct = 0 if walk >= INFINITY else min(delta + 1, at - origin_arrival - walk)
                indirect = 0 if at <= witness2.get(vt, round2[vt]) else sigma.get(vt, delta) + 1
                aggregated = min(aggregated, max(direct, indirect))
                if latest_witness is None or round2[vt] > latest_witness:
                    latest_witness = round2[vt]
            feasibility = registered.get(i)
            if feasibility is None:
                continue
            vd = stops[first + i]
            tc = usable[vd]
            low = max(split[i], aggregated)
            join = round1[vd] - tc
            high = min(feasibility, join)
            time_travel = latest_witness - tc
            if self.options.time_travel_pruning:
                high = min(high, time_travel)
            if self.trace is not None:
                self.trace.destinations[(o, first + i)] = DestinationTrace(
                    tc, join, feasibility, split[i], aggregated, low, time_travel, high)
            if low <= high:
                self.result.append(Shortcut(o, first + i, tc - origin_arrival, low, high))


# -- whole network -------------------------------------------------------------


def _stops_worker(args) -> list[Shortcut]:
    network, max_delay, options, sources = args
    distances = DistanceCache(network.graph)
    worst = [a + max_delay for a in network.event_arr]
    out: list[Shortcut] = []
    for source in sources:
        out += SourceStopComputation(network, max_delay, source, options, distances, worst).run()
    return out


def compute_shortcuts(
    network: Network,
    max_delay: int,
    options: ShortcutOptions | None = None,
    trace: Trace | None = None,
    sources: Iterable[int] | None = None,
) -> ShortcutSet:
    """Shortcut set sufficient for every scenario whose delays stay within `max_delay` seconds."""
    if max_delay < 0:
        raise ValueError("delay limit must be non-negative")
    options = options or ShortcutOptions()
    sources = list(range(network.stop_count)) if sources is None else list(sources)
    result = ShortcutSet(max_delay, network.content_hash())
    if options.workers > 1 and trace is None and len(sources) > 1:
        chunks = [sources[k::options.workers] for k in range(options.workers)]
        with ProcessPoolExecutor(max_workers=options.workers) as pool:
            for shortcuts in pool.map(_stops_worker, [(network, max_delay, options, c) for c in chunks]):
                for shortcut in shortcuts:
                    result.add(shortcut)
        return result
    distances = DistanceCache(network.graph)
    worst = [a + max_delay for a in network.event_arr]
    for source in sources:
        for shortcut in SourceStopComputation(network, max_delay, source, options, distances, worst, trace).run():
            result.add(shortcut)
        log.debug("source stop %d done, %d shortcuts so far", source, len(result))
    return result
