"""Static network model: stops, stop events, trips, FIFO routes and the transfer graph."""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence


class NetworkError(ValueError):
    """Base class for problems found while loading a network."""


class NetworkParseError(NetworkError):
    pass


class NetworkIntegrityError(NetworkError):
    pass


class NetworkOrderingError(NetworkError):
    pass


@dataclass(frozen=True)
class TripRecord:
    """A trip as it appears in the interchange files, before route assignment."""

    name: str
    stops: tuple[int, ...]
    arrivals: tuple[int, ...]
    departures: tuple[int, ...]


@dataclass(frozen=True)
class StopEvent:
    stop: int
    arrival: int
    departure: int
    trip: int
    index: int


class TransferGraph:
    """Directed graph with strictly positive integer edge weights.

    Parallel edges collapse to the cheapest one and self-loops are dropped.
    """

    def __init__(self, vertex_count: int, edges: Iterable[tuple[int, int, int]]):
        best: dict[tuple[int, int], int] = {}
        for u, v, w in edges:
            if not (0 <= u < vertex_count and 0 <= v < vertex_count):
                raise NetworkIntegrityError(f"transfer {u}->{v} references an unknown vertex")
            if w <= 0:
                raise NetworkIntegrityError(f"transfer {u}->{v} has non-positive time {w}")
            if u == v:
                continue
            key = (u, v)
            if key not in best or w < best[key]:
                best[key] = w
        self.vertex_count = vertex_count
        self.out_edges: list[list[tuple[int, int]]] = [[] for _ in range(vertex_count)]
        self.in_edges: list[list[tuple[int, int]]] = [[] for _ in range(vertex_count)]
        for (u, v), w in sorted(best.items()):
            self.out_edges[u].append((v, w))
            self.in_edges[v].append((u, w))

    @property
    def edge_count(self) -> int:
        return sum(len(adj) for adj in self.out_edges)

    def edges(self) -> list[tuple[int, int, int]]:
        return [(u, v, w) for u, adj in enumerate(self.out_edges) for v, w in adj]


def is_fifo_pair(
    first: range, second: range, arrival: Sequence[int], departure: Sequence[int]
) -> bool:
    """True if the trip with events `first` never overtakes the trip with events `second`."""
    for a, b in zip(first, second):
        if arrival[a] > arrival[b] or departure[a] > departure[b]:
            return False
    return True


def partition_routes(
    stop_sequences: Sequence[tuple[int, ...]],
    event_ranges: Sequence[range],
    arrival: Sequence[int],
    departure: Sequence[int],
) -> list[list[int]]:
    """Greedy FIFO partition of trips into routes.

    Trips sharing a stop sequence are sorted by departure at index 0 (input order
    breaks ties) and each one joins the first group whose last trip it does not
    overtake. Both arrivals and departures must be ordered for a pair to count as
    FIFO, which keeps earliest-trip lookups valid for boarding as well as exiting.
    Groups are returned in order of first appearance of their stop sequence.
    """
    by_sequence: dict[tuple[int, ...], list[int]] = {}
    for trip, stops in enumerate(stop_sequences):
        by_sequence.setdefault(stops, []).append(trip)
    groups: list[list[int]] = []
    for trips in by_sequence.values():
        trips = sorted(trips, key=lambda t: departure[event_ranges[t][0]])
        local: list[list[int]] = []
        for trip in trips:
            for group in local:
                if is_fifo_pair(event_ranges[group[-1]], event_ranges[trip], arrival, departure):
                    group.append(trip)
                    break
            else:
                local.append([trip])
        groups.extend(local)
    return groups


class RoutePartition:
    """Routes over a fixed set of trips, valid for one particular assignment of times."""

    def __init__(self, network: "Network", groups: list[list[int]], arrival: Sequence[int], departure: Sequence[int]):
        self.route_trips: list[list[int]] = [list(g) for g in groups]
        self.route_stops: list[tuple[int, ...]] = [network.trip_stops[g[0]] for g in groups]
        self.trip_route = [0] * network.trip_count
        self.trip_pos = [0] * network.trip_count
        self.stop_routes: list[list[tuple[int, int]]] = [[] for _ in range(network.stop_count)]
        # route_firsts[r][p]: first event id of the p-th trip of route r
        self.route_firsts: list[list[int]] = []
        # route_departures[r][i][p]: departure of the p-th trip at index i (sorted in p)
        self.route_departures: list[list[list[int]]] = []
        for r, trips in enumerate(self.route_trips):
            firsts = [network.trip_first[t] for t in trips]
            self.route_firsts.append(firsts)
            for p, t in enumerate(trips):
                self.trip_route[t] = r
                self.trip_pos[t] = p
            stops = self.route_stops[r]
            for i, stop in enumerate(stops):
                self.stop_routes[stop].append((r, i))
            self.route_departures.append([[departure[f + i] for f in firsts] for i in range(len(stops))])

    @property
    def route_count(self) -> int:
        return len(self.route_trips)

    def is_fifo(self, arrival: Sequence[int], departure: Sequence[int], network: "Network") -> bool:
        for trips in self.route_trips:
            for a, b in zip(trips, trips[1:]):
                if not is_fifo_pair(network.trip_events(a), network.trip_events(b), arrival, departure):
                    return False
        return True


class Network:
    """Immutable public transit network.

    Stops are vertices 0..stop_count-1. Events of a trip have consecutive ids and,
    in the base partition, trips of a route have consecutive ids ordered by FIFO.
    """

    def __init__(
        self,
        stop_names: Sequence[str],
        trips: Sequence[TripRecord],
        transfers: Iterable[tuple[int, int, int]],
        vertex_count: int | None = None,
        vertex_names: Sequence[str] | None = None,
    ):
        self.stop_count = len(stop_names)
        self.stop_names = list(stop_names)
        self.vertex_count = self.stop_count if vertex_count is None else vertex_count
        if self.vertex_count < self.stop_count:
            raise NetworkIntegrityError("vertex count smaller than stop count")
        self.vertex_names = list(vertex_names) if vertex_names is not None else [
            self.stop_names[v] if v < self.stop_count else f"v{v}" for v in range(self.vertex_count)
        ]
        for record in trips:
            _check_trip(record, self.stop_count)
        self.graph = TransferGraph(self.vertex_count, transfers)

        # First pass: provisional ids in input order, used only to partition.
        sequences = [r.stops for r in trips]
        ranges, arr, dep = [], [], []
        for record in trips:
            start = len(arr)
            arr.extend(record.arrivals)
            dep.extend(record.departures)
            ranges.append(range(start, len(arr)))
        groups = partition_routes(sequences, ranges, arr, dep)
        order = [t for g in groups for t in g]

        self.trip_names: list[str] = []
        self.trip_first: list[int] = []
        self.trip_len: list[int] = []
        self.trip_stops: list[tuple[int, ...]] = []
        self.event_stop: list[int] = []
        self.event_arr: list[int] = []
        self.event_dep: list[int] = []
        self.event_trip: list[int] = []
        self.event_index: list[int] = []
        for new_id, old in enumerate(order):
            record = trips[old]
            self.trip_names.append(record.name)
            self.trip_first.append(len(self.event_stop))
            self.trip_len.append(len(record.stops))
            self.trip_stops.append(record.stops)
            for i, stop in enumerate(record.stops):
                self.event_stop.append(stop)
                self.event_arr.append(record.arrivals[i])
                self.event_dep.append(record.departures[i])
                self.event_trip.append(new_id)
                self.event_index.append(i)
        renumber = {old: new for new, old in enumerate(order)}
        self.routes = RoutePartition(self, [[renumber[t] for t in g] for g in groups], self.event_arr, self.event_dep)
        self._trip_by_name = {name: t for t, name in enumerate(self.trip_names)}

    # -- basic accessors -------------------------------------------------
    @property
    def trip_count(self) -> int:
        return len(self.trip_first)

    @property
    def event_count(self) -> int:
        return len(self.event_stop)

    def trip_events(self, trip: int) -> range:
        first = self.trip_first[trip]
        return range(first, first + self.trip_len[trip])

    def event(self, e: int) -> StopEvent:
        return StopEvent(self.event_stop[e], self.event_arr[e], self.event_dep[e], self.event_trip[e], self.event_index[e])

    def trip_by_name(self, name: str) -> int:
        return self._trip_by_name[name]

    def trip_segment(self, trip: int, i: int, j: int) -> range:
        """Event ids of trip[i..j] inclusive."""
        if not (0 <= trip < self.trip_count):
            raise IndexError(f"unknown trip {trip}")
        if not (0 <= i <= j < self.trip_len[trip]):
            raise IndexError(f"segment [{i},{j}] out of range for trip of length {self.trip_len[trip]}")
        first = self.trip_first[trip]
        return range(first + i, first + j + 1)

    def trip_records(self) -> list[TripRecord]:
        out = []
        for t in range(self.trip_count):
            ev = self.trip_events(t)
            out.append(TripRecord(
                self.trip_names[t],
                self.trip_stops[t],
                tuple(self.event_arr[e] for e in ev),
                tuple(self.event_dep[e] for e in ev),
            ))
        return out

    def repartition(self, arrival: Sequence[int], departure: Sequence[int]) -> RoutePartition:
        """Routes that stay FIFO under the given (typically delayed) times."""
        ranges = [self.trip_events(t) for t in range(self.trip_count)]
        groups = partition_routes(self.trip_stops, ranges, arrival, departure)
        return RoutePartition(self, groups, arrival, departure)

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.stop_count} {self.vertex_count}\n".encode())
        for t in range(self.trip_count):
            ev = self.trip_events(t)
            h.update(" ".join(f"{self.event_stop[e]}:{self.event_arr[e]}:{self.event_dep[e]}" for e in ev).encode())
            h.update(b"\n")
        for u, v, w in self.graph.edges():
            h.update(f"{u} {v} {w}\n".encode())
        return h.hexdigest()[:16]


def _check_trip(record: TripRecord, stop_count: int) -> None:
    n = len(record.stops)
    if n < 2:
        raise NetworkIntegrityError(f"trip {record.name} has fewer than two stop events")
    if len(record.arrivals) != n or len(record.departures) != n:
        raise NetworkIntegrityError(f"trip {record.name} has mismatched time columns")
    for s in record.stops:
        if not 0 <= s < stop_count:
            raise NetworkIntegrityError(f"trip {record.name} references unknown stop {s}")
    for i in range(n):
        if record.arrivals[i] > record.departures[i]:
            raise NetworkOrderingError(f"trip {record.name} departs before arriving at index {i}")
        if i + 1 < n and record.departures[i] > record.arrivals[i + 1]:
            raise NetworkOrderingError(f"trip {record.name} is not time-ordered at index {i}")


# -- interchange format ---------------------------------------------------

STOPS_FILE = "stops.csv"
TRIPS_FILE = "trips.csv"
TRANSFERS_FILE = "transfers.csv"
VERTICES_FILE = "vertices.csv"


def _read_table(path: Path, columns: tuple[str, ...], required: bool = True) -> list[dict[str, str]]:
    if not path.exists():
        if required:
            raise NetworkParseError(f"missing table {path.name}")
        return []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or any(c not in reader.fieldnames for c in columns):
            raise NetworkParseError(f"{path.name}: header must contain {', '.join(columns)}")
        rows = []
        for line, row in enumerate(reader, start=2):
            if any(row.get(c) in (None, "") for c in columns):
                raise NetworkParseError(f"{path.name}:{line}: missing field")
            rows.append(row)
        return rows


def _int(value: str, where: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise NetworkParseError(f"{where}: expected an integer, got {value!r}") from None


def load_network(path: str | Path, buffer_time: int = 0) -> Network:
    """Read a network directory; departures are reduced by `buffer_time` (never below arrival)."""
    root = Path(path)
    if not root.is_dir():
        raise NetworkParseError(f"{root} is not a network directory")
    stop_rows = _read_table(root / STOPS_FILE, ("stop_id", "vertex_id", "name"))
    trip_rows = _read_table(root / TRIPS_FILE, ("trip_id", "seq", "stop_id", "arr_seconds", "dep_seconds"))
    transfer_rows = _read_table(root / TRANSFERS_FILE, ("from_vertex", "to_vertex", "travel_seconds"))
    vertex_rows = _read_table(root / VERTICES_FILE, ("vertex_id", "name"), required=False)

    stop_vertex: dict[str, int] = {}
    names: dict[int, str] = {}
    for row in stop_rows:
        vid = _int(row["vertex_id"], STOPS_FILE)
        if row["stop_id"] in stop_vertex or vid in names:
            raise NetworkIntegrityError(f"duplicate stop {row['stop_id']}")
        stop_vertex[row["stop_id"]] = vid
        names[vid] = row["name"]
    if sorted(names) != list(range(len(names))):
        raise NetworkIntegrityError("stop vertex ids must be exactly 0..|stops|-1")
    stop_names = [names[v] for v in range(len(names))]

    extra: dict[int, str] = {}
    for row in vertex_rows:
        vid = _int(row["vertex_id"], VERTICES_FILE)
        if vid in names or vid in extra:
            raise NetworkIntegrityError(f"duplicate vertex {vid}")
        extra[vid] = row["name"]
    if extra and sorted(extra) != list(range(len(names), len(names) + len(extra))):
        raise NetworkIntegrityError("non-stop vertex ids must follow the stop ids without gaps")
    vertex_names = stop_names + [extra[v] for v in sorted(extra)]

    per_trip: dict[str, dict[int, tuple[int, int, int]]] = {}
    for row in trip_rows:
        where = f"{TRIPS_FILE} trip {row['trip_id']}"
        if row["stop_id"] not in stop_vertex:
            raise NetworkIntegrityError(f"{where} references unknown stop {row['stop_id']}")
        seq = _int(row["seq"], where)
        events = per_trip.setdefault(row["trip_id"], {})
        if seq in events:
            raise NetworkIntegrityError(f"{where} repeats sequence number {seq}")
        arr = _int(row["arr_seconds"], where)
        dep = _int(row["dep_seconds"], where)
        events[seq] = (stop_vertex[row["stop_id"]], arr, dep)

    records = []
    for name, events in per_trip.items():
        ordered = [events[k] for k in sorted(events)]
        if any(arr > dep for _, arr, dep in ordered):
            raise NetworkOrderingError(f"trip {name} departs before arriving")
        records.append(TripRecord(
            name,
            tuple(s for s, _, _ in ordered),
            tuple(a for _, a, _ in ordered),
            tuple(max(a, d - buffer_time) for _, a, d in ordered),
        ))

    transfers = [
        (_int(r["from_vertex"], TRANSFERS_FILE), _int(r["to_vertex"], TRANSFERS_FILE), _int(r["travel_seconds"], TRANSFERS_FILE))
        for r in transfer_rows
    ]
    return Network(stop_names, records, transfers, len(vertex_names), vertex_names)


def save_network(network: Network, path: str | Path) -> None:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    with (root / STOPS_FILE).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["stop_id", "vertex_id", "name"])
        for v in range(network.stop_count):
            w.writerow([f"S{v}", v, network.stop_names[v]])
    with (root / TRIPS_FILE).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["trip_id", "seq", "stop_id", "arr_seconds", "dep_seconds"])
        for t in range(network.trip_count):
            for e in network.trip_events(t):
                w.writerow([network.trip_names[t], network.event_index[e], f"S{network.event_stop[e]}", network.event_arr[e], network.event_dep[e]])
    with (root / TRANSFERS_FILE).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["from_vertex", "to_vertex", "travel_seconds"])
        w.writerows(network.graph.edges())
    vertices = root / VERTICES_FILE
    if network.vertex_count > network.stop_count:
        with vertices.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["vertex_id", "name"])
            for v in range(network.stop_count, network.vertex_count):
                w.writerow([v, network.vertex_names[v]])
    elif vertices.exists():
        vertices.unlink()
