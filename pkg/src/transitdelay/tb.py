"""Trip-based queries over a shortcut adjacency, with one-to-many searches for the first and last transfer."""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass
from typing import Sequence

from .journeys import Leg, ParetoLabel, PartialJourney, Transfer
from .mr import DEFAULT_MAX_ROUNDS, QueryResult, TimetableView
from .timetable import Network, TransferGraph
from .transfers import INFINITY, StopDistanceIndex, one_to_many


def one_to_many_transfer_search(graph: TransferGraph, vertex: int, direction: str = "forward") -> list[int]:
    """Shortest transfer distance from `vertex` (forward) or to `vertex` (backward) for every vertex."""
    if direction not in ("forward", "backward"):
        raise ValueError(f"unknown direction {direction!r}")
    return one_to_many(graph, vertex, backward=direction == "backward")


class TBData:
    """Query structures for one timetable state: delayed times, FIFO routes and outgoing shortcuts per event."""

    def __init__(self, view: TimetableView, adjacency: dict[int, Sequence[tuple[int, int]]],
                 distances: StopDistanceIndex | None = None):
        self.view = view
        self.network = view.network
        # (destination event, transfer time), sorted by destination
        self.adjacency = {o: tuple(sorted(edges)) for o, edges in adjacency.items() if edges}
        # same edges with the destination resolved to (trip, index), for the query loop
        trip_of, index_of = self.network.event_trip, self.network.event_index
        self._resolved = {
            o: tuple((d, trip_of[d], index_of[d], transfer) for d, transfer in edges)
            for o, edges in self.adjacency.items()
        }
        self.distances = distances or StopDistanceIndex(self.network.graph)
        self.forward_distances = self.distances.from_vertex
        self.backward_distances = self.distances.to_vertex

    @property
    def shortcut_count(self) -> int:
        return sum(len(edges) for edges in self.adjacency.values())


@dataclass
class _Segment:
    trip: int
    enter: int
    end: int          # last exit index covered (inclusive)
    parent: int       # index of the segment this one was reached from, -1 for the first trip
    via: int          # exit event used on the parent segment
    transfer: int     # transfer time of the shortcut used


def tb_query(
    data: TBData,
    source: int,
    target: int,
    departure: int,
    max_rounds: int = DEFAULT_MAX_ROUNDS,
    with_journeys: bool = True,
    reached_pruning: bool = True,
) -> QueryResult:
    """Pareto set over (arrival, trips) using only the shortcuts in `data`."""
    view = data.view
    network = data.network
    routes = view.routes
    arrival, departure_times = view.arrival, view.departure
    stops = network.event_stop
    trip_first, trip_len = network.trip_first, network.trip_len
    from_source = data.forward_distances(source)
    to_target = data.backward_distances(target)

    best = INFINITY
    best_at: tuple[int, int] | None = None  # (segment, exit index) or None for the direct transfer
    labels: list[ParetoLabel] = []
    results: list[tuple[int, tuple[int, int] | None]] = []
    if target in from_source:
        best = departure + from_source[target]
        labels.append(ParetoLabel(best, 0))
        results.append((best, None))

    reached = list(trip_len)
    resolved = data._resolved
    segments: list[_Segment] = []

    def enqueue(trip: int, index: int, parent: int, via: int, transfer: int, queue: list[int]) -> None:
        if reached_pruning:
            if index >= reached[trip]:
                return
            # exits up to the old reached index are new; later ones are covered already
            end = min(reached[trip], trip_len[trip] - 1)
            trips = routes.route_trips[routes.trip_route[trip]]
            for later in trips[routes.trip_pos[trip]:]:
                if reached[later] <= index:
                    break
                reached[later] = index
        else:
            end = trip_len[trip] - 1
        if end <= index:
            return
        queue.append(len(segments))
        segments.append(_Segment(trip, index, end, parent, via, transfer))

    queue: list[int] = []
    stop_count = network.stop_count
    for p, d in from_source.items():
        if p >= stop_count:
            break
        ready = departure + d
        for r, i in routes.stop_routes[p]:
            if i == len(routes.route_stops[r]) - 1:
                continue
            row = routes.route_departures[r][i]
            k = bisect_left(row, ready)
            if k < len(row):
                enqueue(routes.route_trips[r][k], i, -1, -1, d, queue)

    for n in range(1, max_rounds + 1):
        if not queue:
            break
        improved = False
        # target arrivals first, so that relaxations below can be pruned by this round's bound
        for k in queue:
            seg = segments[k]
            first = trip_first[seg.trip]
            for j in range(seg.enter + 1, seg.end + 1):
                e = first + j
                walk = to_target.get(stops[e], INFINITY)
                if arrival[e] + walk < best:
                    best = arrival[e] + walk
                    best_at = (k, j)
                    improved = True
        if improved:
            labels.append(ParetoLabel(best, n))
            results.append((best, best_at))
        if n == max_rounds:
            break
        next_queue: list[int] = []
        for k in queue:
            seg = segments[k]
            first = trip_first[seg.trip]
            for j in range(seg.enter + 1, seg.end + 1):
                e = first + j
                a = arrival[e]
                if a >= best:
                    continue
                for d, trip, index, transfer in resolved.get(e, ()):
                    ready = a + transfer
                    if ready > departure_times[d] or ready >= best:
                        continue
                    if reached_pruning and index >= reached[trip]:
                        continue
                    enqueue(trip, index, k, e, transfer, next_queue)
        queue = next_queue

    journeys = []
    if with_journeys:
        for _, at in results:
            journeys.append(_unpack(network, segments, source, target, from_source, to_target, at))
    return QueryResult(labels, journeys)


def _unpack(network: Network, segments: list[_Segment], source: int, target: int,
            from_source: dict[int, int], to_target: dict[int, int], at: tuple[int, int] | None) -> PartialJourney:
    if at is None:
        return PartialJourney((Transfer(source, target, from_source[target]),))
    k, exit_ = at
    legs: list[Leg] = []
    transfers: list[Transfer] = []
    stops = network.event_stop
    last_stop = stops[network.trip_first[segments[k].trip] + exit_]
    transfers.append(Transfer(last_stop, target, to_target[last_stop]))
    while k >= 0:
        seg = segments[k]
        first = network.trip_first[seg.trip]
        board_stop = stops[first + seg.enter]
        legs.append(Leg(seg.trip, seg.enter, exit_))
        if seg.parent < 0:
            transfers.append(Transfer(source, board_stop, seg.transfer))
        else:
            transfers.append(Transfer(stops[seg.via], board_stop, seg.transfer))
            exit_ = network.event_index[seg.via]
        k = seg.parent
    legs.reverse()
    transfers.reverse()
    return PartialJourney(tuple(transfers), tuple(legs))
