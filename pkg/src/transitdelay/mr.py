"""Round-based multimodal search (RAPTOR with transfer-graph relaxation) and its variants."""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass
from heapq import heappop, heappush
from typing import Callable, Sequence

from .delays import DelayScenario
from .journeys import Leg, ParetoLabel, PartialJourney, Transfer
from .timetable import Network, RoutePartition
from .transfers import INFINITY

DEFAULT_MAX_ROUNDS = 8


class TimetableView:
    """A network together with (possibly delayed) event times and routes that are FIFO under them."""

    def __init__(
        self,
        network: Network,
        arrival: Sequence[int] | None = None,
        departure: Sequence[int] | None = None,
        routes: RoutePartition | None = None,
    ):
        self.network = network
        self.arrival = list(network.event_arr) if arrival is None else list(arrival)
        self.departure = list(network.event_dep) if departure is None else list(departure)
        if routes is None:
            if arrival is None and departure is None:
                routes = network.routes
            else:
                routes = network.repartition(self.arrival, self.departure)
        self.routes = routes

    @classmethod
    def for_scenario(cls, network: Network, scenario: DelayScenario | None) -> "TimetableView":
        if scenario is None:
            return cls(network)
        return cls(network, scenario.arrival_times(network), scenario.departure_times(network))


# -- forward search with journey extraction -----------------------------------

WALK = 0
RIDE = 1


class ForwardSearch:
    """Forward MR from a set of (vertex, time) seeds.

    `prune(vertex, round, time)` may veto propagation from a vertex whose label was
    just improved. Labels stay exact at vertices that are never pruned.
    """

    def __init__(
        self,
        view: TimetableView,
        max_rounds: int = DEFAULT_MAX_ROUNDS,
        prune: Callable[[int, int, int], bool] | None = None,
        target: int | None = None,
    ):
        self.view = view
        self.max_rounds = max_rounds
        self.prune = prune
        self.target = target
        network = view.network
        self.graph = network.graph
        V = network.vertex_count
        self.best = [INFINITY] * V
        self.parents: list[dict[int, tuple]] = []
        self.target_rounds: list[int] = []  # best arrival at target after each round

    def run(self, seeds: Sequence[tuple[int, int]]) -> "ForwardSearch":
        best = self.best
        parents: dict[int, tuple] = {}
        heap = []
        for v, t in seeds:
            if t < best[v]:
                best[v] = t
                parents[v] = (WALK, v, 0)
                heappush(heap, (t, v, v, t))
        marked = self._relax(heap, parents, 0)
        self.parents.append(parents)
        self._record_target()
        stop_count = self.view.network.stop_count
        for n in range(1, self.max_rounds + 1):
            marked_stops = [v for v in marked if v < stop_count]
            if not marked_stops:
                break
            previous = list(best)
            parents = {}
            improved = self._scan_routes(marked_stops, previous, parents, n)
            heap = [(best[v], v, v, best[v]) for v in improved]
            marked = set(improved) | self._relax(heap, parents, n)
            self.parents.append(parents)
            self._record_target()
        return self

    def _record_target(self) -> None:
        if self.target is not None:
            self.target_rounds.append(self.best[self.target])

    def _bound(self) -> int:
        return INFINITY if self.target is None else self.best[self.target]

    def _pruned(self, v: int, n: int, t: int) -> bool:
        return self.prune is not None and self.prune(v, n, t)

    def _relax(self, heap: list, parents: dict, n: int) -> set[int]:
        """Dijkstra from the heap entries (time, vertex, origin, origin time)."""
        best = self.best
        out_edges = self.graph.out_edges
        settled: set[int] = set()
        heap.sort()
        while heap:
            t, v, origin, origin_time = heappop(heap)
            if t > best[v] or v in settled:
                continue
            settled.add(v)
            if self._pruned(v, n, t):
                continue
            bound = self._bound()
            for w, length in out_edges[v]:
                nt = t + length
                if nt < best[w] and nt < bound:
                    best[w] = nt
                    parents[w] = (WALK, origin, nt - origin_time)
                    heappush(heap, (nt, w, origin, origin_time))
        return settled

    def _scan_routes(self, marked_stops: list[int], previous: list[int], parents: dict, n: int) -> list[int]:
        routes = self.view.routes
        arrival = self.view.arrival
        best = self.best
        first_index: dict[int, int] = {}
        for stop in marked_stops:
            if self._pruned(stop, n - 1, previous[stop]):
                continue
            for r, i in routes.stop_routes[stop]:
                if first_index.get(r, INFINITY) > i:
                    first_index[r] = i
        improved = []
        for r in sorted(first_index):
            stops = routes.route_stops[r]
            firsts = routes.route_firsts[r]
            deps = routes.route_departures[r]
            trips = routes.route_trips[r]
            active = len(firsts)
            enter = -1
            last = len(stops) - 1
            for i in range(first_index[r], len(stops)):
                v = stops[i]
                if active < len(firsts):
                    a = arrival[firsts[active] + i]
                    if a < best[v] and a < self._bound():
                        best[v] = a
                        parents[v] = (RIDE, trips[active], enter, i)
                        improved.append(v)
                if i < last:
                    label = previous[v]
                    if label < INFINITY and not self._pruned(v, n - 1, label):
                        p = bisect_left(deps[i], label, 0, active)
                        if p < active:
                            active = p
                            enter = i
        return improved

    # -- extraction ---------------------------------------------------------
    def _parent_at(self, v: int, n: int) -> tuple[tuple, int]:
        for k in range(n, -1, -1):
            entry = self.parents[k].get(v)
            if entry is not None:
                return entry, k
        raise KeyError(f"vertex {v} was never reached")

    def journey(self, target: int, rounds: int) -> PartialJourney:
        """Journey realising the best arrival at `target` with at most `rounds` trips."""
        network = self.view.network
        legs: list[Leg] = []
        transfers: list[Transfer] = []
        v = target
        n = min(rounds, len(self.parents) - 1)
        while True:
            entry, n = self._parent_at(v, n)
            if entry[0] == WALK:
                _, origin, duration = entry
                transfers.append(Transfer(origin, v, duration))
                if n == 0:
                    break
                v = origin
                entry, _ = self._parent_at(v, n)
            else:
                transfers.append(Transfer(v, v, 0))
            _, trip, enter, exit_ = entry
            legs.append(Leg(trip, enter, exit_))
            v = network.event_stop[network.trip_first[trip] + enter]
            n -= 1
        transfers.reverse()
        legs.reverse()
        return PartialJourney(tuple(transfers), tuple(legs))


@dataclass
class QueryResult:
    labels: list[ParetoLabel]
    journeys: list[PartialJourney]


def mr_query(
    view: TimetableView,
    source: int,
    target: int,
    departure: int,
    max_rounds: int = DEFAULT_MAX_ROUNDS,
    with_journeys: bool = True,
) -> QueryResult:
    """Pareto set over (arrival, trips) for one query."""
    search = ForwardSearch(view, max_rounds, target=target).run([(source, departure)])
    labels, journeys = [], []
    previous = INFINITY
    for n, arrival in enumerate(search.target_rounds):
        if arrival < previous:
            labels.append(ParetoLabel(arrival, n))
            if with_journeys:
                journeys.append(search.journey(target, n))
            previous = arrival
    return QueryResult(labels, journeys)


# -- backward search ----------------------------------------------------------


def backward_mr(
    view: TimetableView,
    targets: dict[int, int],
    min_time: int = -INFINITY,
    max_rounds: int = 2,
) -> list[list[int]]:
    """Latest departure per vertex and round that still reaches some target within its bound.

    Labels below `min_time` are kept but not propagated.
    """
    network = view.network
    routes = view.routes
    arrival, departure = view.arrival, view.departure
    in_edges = network.graph.in_edges
    V = network.vertex_count
    NEG = -INFINITY
    latest = [NEG] * V

    def relax(seeds: list[int], marked: set[int]) -> None:
        heap = [(-latest[v], v) for v in seeds]
        heap.sort()
        done = set()
        while heap:
            negt, v = heappop(heap)
            t = -negt
            if t < latest[v] or v in done:
                continue
            done.add(v)
            marked.add(v)
            if t < min_time:
                continue
            for u, length in in_edges[v]:
                nt = t - length
                if nt > latest[u]:
                    latest[u] = nt
                    heappush(heap, (-nt, u))

    seeds = []
    for v, bound in targets.items():
        if bound > latest[v]:
            latest[v] = bound
            seeds.append(v)
    marked: set[int] = set()
    relax(seeds, marked)
    result = [list(latest)]
    for _ in range(max_rounds):
        previous = list(latest)
        last_index: dict[int, int] = {}
        for v in marked:
            if v >= network.stop_count or previous[v] < min_time:
                continue
            for r, i in routes.stop_routes[v]:
                if last_index.get(r, -1) < i:
                    last_index[r] = i
        improved = []
        for r in sorted(last_index):
            stops = routes.route_stops[r]
            firsts = routes.route_firsts[r]
            active = -1
            for i in range(last_index[r], -1, -1):
                v = stops[i]
                if active >= 0:
                    d = departure[firsts[active] + i]
                    if d > latest[v]:
                        latest[v] = d
                        improved.append(v)
                if i > 0:
                    label = previous[v]
                    if label > NEG and label >= min_time:
                        # latest trip whose arrival here is within the label
                        lo, hi = active + 1, len(firsts)
                        while lo < hi:
                            mid = (lo + hi) // 2
                            if arrival[firsts[mid] + i] <= label:
                                lo = mid + 1
                            else:
                                hi = mid
                        if lo - 1 > active:
                            active = lo - 1
        marked = set()
        relax(improved, marked)
        result.append(list(latest))
        if not marked:
            while len(result) <= max_rounds:
                result.append(list(latest))
            break
    return result


# -- worst-case witness search used by the shortcut computation ---------------


class PrefixLabels:
    """Witness labels for journeys from the source stop after extending with a source event."""

    __slots__ = ("round1", "round2", "entry_overlay")

    def __init__(self, round1: list[int], round2: list[int], entry_overlay: dict[tuple[int, int], int]):
        self.round1 = round1
        self.round2 = round2
        self.entry_overlay = entry_overlay


class WitnessSearch:
    """Two-round witness searches from one source stop in the worst-case overlay.

    Runs are issued for decreasing departure times. When resuming, labels and
    boarding records of later runs are kept and only journeys departing before the
    previous run's departure time are explored. The per-(route, index) record of the
    earliest boarded trip position yields each trip's entry index.
    """

    def __init__(self, network: Network, max_delay: int, source: int, source_dist: list[int],
                 worst_arrival: list[int] | None = None, resume: bool = True):
        self.network = network
        self.max_delay = max_delay
        self.source = source
        self.source_dist = source_dist
        self.resume = resume
        self.arrival = worst_arrival if worst_arrival is not None else [a + max_delay for a in network.event_arr]
        self.departure = network.event_dep
        self.routes = network.routes
        self.reachable = [v for v in range(network.vertex_count) if source_dist[v] < INFINITY]
        self._reset()
        self.previous_departure: int | None = None

    def _reset(self) -> None:
        V = self.network.vertex_count
        self.round1 = [INFINITY] * V
        self.round2 = [INFINITY] * V
        self.entry = [[len(trips)] * len(stops) for trips, stops in zip(self.routes.route_trips, self.routes.route_stops)]

    # -- shared pieces --------------------------------------------------------
    def _relax(self, labels: list[int], seeds: list[int]) -> list[int]:
        out_edges = self.network.graph.out_edges
        heap = [(labels[v], v) for v in seeds]
        heap.sort()
        improved = []
        done = set()
        while heap:
            t, v = heappop(heap)
            if t > labels[v] or v in done:
                continue
            done.add(v)
            for w, length in out_edges[v]:
                nt = t + length
                if nt < labels[w]:
                    labels[w] = nt
                    improved.append(w)
                    heappush(heap, (nt, w))
        return improved

    def _scan(self, boarding: list[int], labels: list[int], marked: list[int], entry_min: Callable[[int, int, int], None],
              restrict: int | None) -> list[int]:
        routes = self.routes
        stop_count = self.network.stop_count
        first_index: dict[int, int] = {}
        for v in marked:
            if v >= stop_count:
                continue
            for r, i in routes.stop_routes[v]:
                if first_index.get(r, INFINITY) > i:
                    first_index[r] = i
        arrival = self.arrival
        dist = self.source_dist
        improved = []
        for r in sorted(first_index):
            stops = routes.route_stops[r]
            firsts = routes.route_firsts[r]
            deps = routes.route_departures[r]
            count = len(firsts)
            active = count
            last = len(stops) - 1
            for i in range(first_index[r], len(stops)):
                v = stops[i]
                if active < count:
                    a = arrival[firsts[active] + i]
                    if a < labels[v]:
                        labels[v] = a
                        improved.append(v)
                if i < last:
                    label = boarding[v]
                    if label < INFINITY:
                        row = deps[i]
                        p = bisect_left(row, label)
                        if p < count:
                            entry_min(r, i, p)
                            if p < active and (restrict is None or row[p] - dist[v] < restrict):
                                active = p
        return improved

    # -- runs -------------------------------------------------------------------
    def run(self, departure: int) -> None:
        """Witness labels for journeys leaving the source stop no earlier than `departure`."""
        if not self.resume or self.previous_departure is None:
            self._reset()
            restrict = None
        else:
            restrict = self.previous_departure
        self.previous_departure = departure
        entry = self.entry

        def entry_min(r: int, i: int, p: int) -> None:
            row = entry[r]
            if p < row[i]:
                row[i] = p

        dist = self.source_dist
        round0 = [INFINITY] * self.network.vertex_count
        r1, r2 = self.round1, self.round2
        for v in self.reachable:
            t = departure + dist[v]
            round0[v] = t
            if t < r1[v]:
                r1[v] = t
        improved1 = self._scan(round0, r1, self.reachable, entry_min, restrict)
        improved1 += self._relax(r1, improved1)
        for v in self.reachable:
            if r1[v] < r2[v]:
                r2[v] = r1[v]
        for v in improved1:
            if r1[v] < r2[v]:
                r2[v] = r1[v]
        improved2 = self._scan(r1, r2, improved1, entry_min, None)
        self._relax(r2, improved2)

    def extend(self, source_event: int) -> PrefixLabels:
        """Labels for the best-case overlay of `source_event`'s prefix: reuse the run, explore journeys boarding it."""
        r1 = list(self.round1)
        r2 = list(self.round2)
        overlay: dict[tuple[int, int], int] = {}
        entry = self.entry

        def entry_min(r: int, i: int, p: int) -> None:
            if p < entry[r][i] and p < overlay.get((r, i), INFINITY):
                overlay[(r, i)] = p

        network = self.network
        trip = network.event_trip[source_event]
        end = network.trip_first[trip] + network.trip_len[trip]
        stops = network.event_stop
        improved1 = []
        for e in range(source_event + 1, end):
            v = stops[e]
            a = self.arrival[e]
            if a < r1[v]:
                r1[v] = a
                improved1.append(v)
        improved1 += self._relax(r1, improved1)
        for v in improved1:
            if r1[v] < r2[v]:
                r2[v] = r1[v]
        improved2 = self._scan(r1, r2, improved1, entry_min, None)
        self._relax(r2, improved2)
        return PrefixLabels(r1, r2, overlay)

    def entry_indices(self, route: int, overlay: dict[tuple[int, int], int] | None = None) -> list[int]:
        """Entry index per trip position of `route`: one past the first index where a witness can board."""
        row = self.entry[route]
        count = len(self.routes.route_trips[route])
        length = len(row)
        result = [length] * count
        for i, p in enumerate(row):
            if overlay:
                q = overlay.get((route, i))
                if q is not None and q < p:
                    p = q
            if p < count and i + 1 < result[p]:
                result[p] = i + 1
        for p in range(1, count):
            if result[p - 1] < result[p]:
                result[p] = result[p - 1]
        return result
