"""Journeys, partial journeys, dominance, Pareto sets and exhaustive reference oracles."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence, TypeVar

from .delays import BestCaseFor, DelaySource, Parameterized, TimeTravel
from .timetable import Network
from .transfers import INFINITY, all_pairs

T = TypeVar("T")


class InstanceTooLarge(RuntimeError):
    pass


@dataclass(frozen=True)
class Transfer:
    source: int
    target: int
    duration: int


@dataclass(frozen=True)
class Leg:
    """Proper trip segment: board trip at `enter`, leave at `exit` (indices within the trip)."""

    trip: int
    enter: int
    exit: int


@dataclass(frozen=True)
class PartialJourney:
    """[head] transfer leg transfer ... leg transfer [tail].

    `head` is a leading trip-segment suffix (trip, exit index) and `tail` a trailing
    trip-segment prefix (trip, enter index). A journey has neither.
    """

    transfers: tuple[Transfer, ...]
    legs: tuple[Leg, ...] = ()
    head: tuple[int, int] | None = None
    tail: tuple[int, int] | None = None

    def __post_init__(self):
        if len(self.transfers) != len(self.legs) + 1:
            raise ValueError("transfers and trip segments must alternate, starting and ending with a transfer")

    @property
    def trips(self) -> int:
        return len(self.legs) + (self.head is not None) + (self.tail is not None)

    @property
    def is_journey(self) -> bool:
        return self.head is None and self.tail is None

    @property
    def source(self) -> int:
        return self.transfers[0].source

    @property
    def target(self) -> int:
        return self.transfers[-1].target

    def events(self, network: Network) -> list[int]:
        """Boarding and exit events in travel order."""
        out = []
        if self.head is not None:
            out.append(network.trip_first[self.head[0]] + self.head[1])
        for leg in self.legs:
            first = network.trip_first[leg.trip]
            out += [first + leg.enter, first + leg.exit]
        if self.tail is not None:
            out.append(network.trip_first[self.tail[0]] + self.tail[1])
        return out

    def is_valid(self, network: Network) -> bool:
        """Structural check: segments are in range and transfers connect their stops."""
        stops = network.event_stop
        at = None
        if self.head is not None:
            trip, exit_ = self.head
            if not 0 <= exit_ < network.trip_len[trip]:
                return False
            at = stops[network.trip_first[trip] + exit_]
        for k, leg in enumerate(self.legs):
            if not 0 <= leg.enter < leg.exit < network.trip_len[leg.trip]:
                return False
            first = network.trip_first[leg.trip]
            t = self.transfers[k]
            if (at is not None and t.source != at) or t.target != stops[first + leg.enter]:
                return False
            at = stops[first + leg.exit]
        last = self.transfers[-1]
        if at is not None and last.source != at:
            return False
        if self.tail is not None:
            trip, enter = self.tail
            if not 0 <= enter < network.trip_len[trip] or stops[network.trip_first[trip] + enter] != last.target:
                return False
        return True


Journey = PartialJourney


def make_journey(network: Network, source: int, target: int, legs: Sequence[Leg], dist: Callable[[int, int], int]) -> PartialJourney:
    """Journey whose transfers are shortest paths between consecutive endpoints."""
    points = [source]
    for leg in legs:
        first = network.trip_first[leg.trip]
        points += [network.event_stop[first + leg.enter], network.event_stop[first + leg.exit]]
    points.append(target)
    transfers = tuple(Transfer(points[2 * k], points[2 * k + 1], dist(points[2 * k], points[2 * k + 1])) for k in range(len(legs) + 1))
    return PartialJourney(transfers, tuple(legs))


def concatenate(a: PartialJourney, b: PartialJourney) -> PartialJourney:
    """Join at a shared vertex (transfers merge) or inside a shared trip (prefix index < suffix index)."""
    if a.tail is None and b.head is None:
        left, right = a.transfers[-1], b.transfers[0]
        if left.target != right.source:
            raise ValueError("transfer join needs a common vertex")
        merged = Transfer(left.source, right.target, left.duration + right.duration)
        return PartialJourney(a.transfers[:-1] + (merged,) + b.transfers[1:], a.legs + b.legs, a.head, b.tail)
    if a.tail is not None and b.head is not None:
        (trip_a, enter), (trip_b, exit_) = a.tail, b.head
        if trip_a != trip_b or not enter < exit_:
            raise ValueError("segment join needs the same trip and prefix index below suffix index")
        return PartialJourney(a.transfers + b.transfers, a.legs + (Leg(trip_a, enter, exit_),) + b.legs, a.head, b.tail)
    raise ValueError("partial journeys cannot be concatenated")


# -- evaluation -------------------------------------------------------------


class Times:
    """Delayed arrival/departure lookup for a network under some delay source."""

    def __init__(self, network: Network, delays: DelaySource | None = None):
        self.network = network
        self.delays = delays

    def arr(self, event: int) -> int:
        base = self.network.event_arr[event]
        return base if self.delays is None else base + self.delays.arr_delay(event)

    def dep(self, event: int) -> int:
        base = self.network.event_dep[event]
        return base if self.delays is None else base + self.delays.dep_delay(event)


class ArrayTimes:
    """Times backed by precomputed delayed arrays."""

    def __init__(self, arrival: Sequence[int], departure: Sequence[int]):
        self._arr = arrival
        self._dep = departure

    def arr(self, event: int) -> int:
        return self._arr[event]

    def dep(self, event: int) -> int:
        return self._dep[event]


def _times(network: Network, scenario) -> Times | ArrayTimes:
    if isinstance(scenario, (Times, ArrayTimes)):
        return scenario
    return Times(network, scenario)


def departure_time(network: Network, journey: PartialJourney, scenario=None) -> int | None:
    """Latest possible departure from the source; None for journeys without trips."""
    times = _times(network, scenario)
    if journey.legs:
        leg = journey.legs[0]
        return times.dep(network.trip_first[leg.trip] + leg.enter) - journey.transfers[0].duration
    if journey.tail is not None:
        return times.dep(network.trip_first[journey.tail[0]] + journey.tail[1]) - journey.transfers[0].duration
    return None


def arrival_time(network: Network, journey: PartialJourney, scenario=None, departure: int = 0) -> int:
    """Arrival at the target of a journey (or of a prefix ending in a transfer)."""
    if journey.tail is not None:
        raise ValueError("a prefix ending inside a trip has no arrival time")
    times = _times(network, scenario)
    if journey.legs:
        leg = journey.legs[-1]
        return times.arr(network.trip_first[leg.trip] + leg.exit) + journey.transfers[-1].duration
    if journey.head is not None:
        return times.arr(network.trip_first[journey.head[0]] + journey.head[1]) + journey.transfers[-1].duration
    return departure + journey.transfers[0].duration


def feasible(network: Network, journey: PartialJourney, scenario, departure: int) -> bool:
    """Departs no earlier than `departure` and every intermediate transfer is catchable."""
    times = _times(network, scenario)
    first_dep = departure_time(network, journey, times)
    if first_dep is not None and first_dep < departure:
        return False
    boardings = [network.trip_first[l.trip] + l.enter for l in journey.legs]
    exits = [network.trip_first[l.trip] + l.exit for l in journey.legs]
    if journey.tail is not None:
        boardings.append(network.trip_first[journey.tail[0]] + journey.tail[1])
    if journey.head is not None:
        exits.insert(0, network.trip_first[journey.head[0]] + journey.head[1])
        boardings.insert(0, None)
    for k in range(1, len(boardings)):
        if times.dep(boardings[k]) < times.arr(exits[k - 1]) + journey.transfers[k].duration:
            return False
    return True


def dominates(
    network: Network,
    witness: PartialJourney,
    candidate: PartialJourney,
    strong: bool = True,
    witness_scenario=None,
    candidate_scenario=None,
    departure: int = 0,
) -> bool:
    """Dominance of `witness` over `candidate`, each evaluated in its own scenario."""
    if witness.head is not None or candidate.head is not None:
        return False
    if witness.tail is None and candidate.tail is None:
        wa = arrival_time(network, witness, witness_scenario, departure)
        ca = arrival_time(network, candidate, candidate_scenario, departure)
        wt, ct = witness.trips, candidate.trips
        if wa > ca or wt > ct:
            return False
        return (wa < ca or wt < ct) if strong else True
    if witness.tail is not None and candidate.tail is not None and witness.tail[0] == candidate.tail[0]:
        j, i = witness.tail[1], candidate.tail[1]
        wt, ct = witness.trips, candidate.trips
        if j > i or wt > ct:
            return False
        return (j < i or wt < ct) if strong else True
    return False


@dataclass(frozen=True, order=True)
class ParetoLabel:
    arrival: int
    trips: int


def pareto_filter(items: Iterable[T], key: Callable[[T], tuple[int, int]] | None = None) -> list[T]:
    """Minimal antichain under weak dominance on (arrival, trips).

    Ties resolve toward earlier arrival, then fewer trips, then input order.
    """
    if key is None:
        key = lambda x: (x.arrival, x.trips)  # noqa: E731
    ranked = sorted(enumerate(items), key=lambda p: (*key(p[1]), p[0]))
    kept: list[T] = []
    best_trips = INFINITY
    for _, item in ranked:
        trips = key(item)[1]
        if trips < best_trips:
            kept.append(item)
            best_trips = trips
    return kept


def labels_of(network: Network, journeys: Iterable[PartialJourney], scenario, departure: int) -> list[ParetoLabel]:
    return [ParetoLabel(arrival_time(network, j, scenario, departure), j.trips) for j in journeys]


# -- exhaustive enumeration -------------------------------------------------


def enumerate_journeys(
    network: Network,
    source: int,
    target: int,
    departure: int,
    max_trips: int,
    scenario=None,
    dist: Sequence[Sequence[int]] | None = None,
    cap: int = 200_000,
) -> list[PartialJourney]:
    """Every feasible journey with at most `max_trips` trips and shortest-path transfers.

    Consecutive segments never use the same trip. When source equals target only
    the empty journey is returned.
    """
    if dist is None:
        dist = all_pairs(network.graph)
    times = _times(network, scenario)
    if source == target:
        return [PartialJourney((Transfer(source, source, 0),))]
    out: list[PartialJourney] = []
    if dist[source][target] < INFINITY:
        out.append(make_journey(network, source, target, (), lambda u, v: dist[u][v]))
    explored = 0
    stops = network.event_stop

    def extend(legs: list[Leg], at_stop: int, ready: int) -> None:
        nonlocal explored
        if len(legs) == max_trips:
            return
        last_trip = legs[-1].trip if legs else -1
        for trip in range(network.trip_count):
            if trip == last_trip:
                continue
            first = network.trip_first[trip]
            for enter in range(network.trip_len[trip] - 1):
                e = first + enter
                walk = dist[at_stop][stops[e]]
                if walk >= INFINITY or ready + walk > times.dep(e):
                    continue
                for exit_ in range(enter + 1, network.trip_len[trip]):
                    explored += 1
                    if explored > cap:
                        raise InstanceTooLarge(f"more than {cap} partial journeys")
                    x = first + exit_
                    legs.append(Leg(trip, enter, exit_))
                    if dist[stops[x]][target] < INFINITY:
                        out.append(make_journey(network, source, target, legs, lambda u, v: dist[u][v]))
                    extend(legs, stops[x], times.arr(x))
                    legs.pop()

    extend([], source, departure)
    return out


@dataclass
class ArrivalProfile:
    """Earliest arrivals per round and earliest boarding index per trip."""

    arrivals: list[list[int]]           # arrivals[n][v], at most n trips
    boarding: list[list[int]] = field(default_factory=list)  # boarding[n][trip], with n trips before


def arrival_profile(
    network: Network,
    source: int,
    departure: int,
    max_trips: int,
    scenario=None,
    dist: Sequence[Sequence[int]] | None = None,
) -> ArrivalProfile:
    """Exact earliest arrivals by a trip-by-trip relaxation that never relies on route FIFO order."""
    if dist is None:
        dist = all_pairs(network.graph)
    times = _times(network, scenario)
    stops = network.event_stop
    V = network.vertex_count
    row = dist[source]
    current = [departure + row[v] if row[v] < INFINITY else INFINITY for v in range(V)]
    profile = ArrivalProfile([current])
    for _ in range(max_trips):
        board = []
        reached = [INFINITY] * network.stop_count
        for trip in range(network.trip_count):
            first = network.trip_first[trip]
            length = network.trip_len[trip]
            start = length
            for i in range(length):
                e = first + i
                if current[stops[e]] <= times.dep(e):
                    start = i
                    break
            board.append(start)
            for i in range(start + 1, length):
                e = first + i
                a = times.arr(e)
                if a < reached[stops[e]]:
                    reached[stops[e]] = a
        profile.boarding.append(board)
        nxt = list(current)
        for u in range(network.stop_count):
            a = reached[u]
            if a >= INFINITY:
                continue
            du = dist[u]
            for v in range(V):
                if du[v] < INFINITY and a + du[v] < nxt[v]:
                    nxt[v] = a + du[v]
        profile.arrivals.append(nxt)
        current = nxt
    return profile


# -- origin delay interval oracle ---------------------------------------------


@dataclass(frozen=True)
class Candidate:
    """Two-trip journey with empty initial and final transfer: source, origin, destination, target events."""

    source: int
    origin: int
    destination: int
    target: int

    @property
    def events(self) -> tuple[int, int, int, int]:
        return (self.source, self.origin, self.destination, self.target)


@dataclass(frozen=True)
class DelayInterval:
    low: int
    high: int
    members: tuple[int, ...] = ()

    @property
    def empty(self) -> bool:
        return self.low > self.high


def enumerate_candidates(network: Network, dist: Sequence[Sequence[int]]) -> list[Candidate]:
    out = []
    stops = network.event_stop
    for t1 in range(network.trip_count):
        f1, n1 = network.trip_first[t1], network.trip_len[t1]
        for si in range(n1 - 1):
            for oi in range(si + 1, n1):
                o = f1 + oi
                for t2 in range(network.trip_count):
                    if t2 == t1:
                        continue
                    f2, n2 = network.trip_first[t2], network.trip_len[t2]
                    for di in range(n2 - 1):
                        if dist[stops[o]][stops[f2 + di]] >= INFINITY:
                            continue
                        for ti in range(di + 1, n2):
                            out.append(Candidate(f1 + si, o, f2 + di, f2 + ti))
    return out


def _later_prefixes_dominated(network: Network, cand: Candidate, profile: ArrivalProfile) -> bool:
    """Destination prefix or the full candidate strongly dominated."""
    trip = network.event_trip[cand.destination]
    d_index = network.event_index[cand.destination]
    if profile.boarding[0][trip] <= d_index or profile.boarding[1][trip] < d_index:
        return True
    vt = network.event_stop[cand.target]
    arr_t = network.event_arr[cand.target]
    return profile.arrivals[1][vt] <= arr_t or profile.arrivals[2][vt] < arr_t


def oracle_origin_delay_interval(
    network: Network,
    cand: Candidate,
    max_delay: int,
    respect_time_travel: bool = False,
    dist: Sequence[Sequence[int]] | None = None,
) -> DelayInterval:
    """Exact origin delays in [0, max_delay] for which the candidate is prefix-optimal.

    The source prefix is assumed Pareto-optimal. `low` is the smallest delay at which
    no later prefix is dominated (max_delay + 1 if none) and `high` the largest delay
    at which the candidate is feasible and its origin prefix undominated (-1 - max_delay
    if none). With `respect_time_travel`, delays that are only possible if a vehicle
    overtakes itself are removed as well.
    """
    if dist is None:
        dist = all_pairs(network.graph)
    stops = network.event_stop
    vs, vo, vd = stops[cand.source], stops[cand.origin], stops[cand.destination]
    walk = dist[vo][vd]
    reach = network.event_arr[cand.origin] + walk  # candidate arrival at the destination stop
    start = network.event_dep[cand.source] + max_delay
    feasibility = min(0, network.event_dep[cand.destination] - reach) + max_delay

    low, high, members = max_delay + 1, -1 - max_delay, []
    for delta in range(max_delay + 1):
        scenario = Parameterized(max_delay, cand.events, cand.origin, delta)
        profile = arrival_profile(network, vs, start, 2, scenario, dist)
        later = _later_prefixes_dominated(network, cand, profile)
        a0, a1 = profile.arrivals[0][vd], profile.arrivals[1][vd]
        origin = a0 <= reach + delta or a1 < reach + delta
        ok = delta <= feasibility
        if not later and low > max_delay:
            low = delta
        if ok and not origin:
            high = delta
        if ok and not origin and not later:
            members.append(delta)

    if respect_time_travel and (members or low <= high):
        trip = network.event_trip[cand.origin]
        index = network.event_index[cand.origin]
        tt = TimeTravel(max_delay, network, trip, index, [cand.source])
        tt_arrival = arrival_profile(network, vs, start, 1, tt, dist).arrivals[1][vd]
        if reach > tt_arrival:
            return DelayInterval(max_delay + 1, -1 - max_delay, ())
        witness = arrival_profile(network, vs, start, 2, BestCaseFor(max_delay, [cand.source]), dist)
        cap = witness.arrivals[2][stops[cand.target]] - reach
        high = min(high, cap)
        members = [d for d in members if d <= cap]
    return DelayInterval(low, high, tuple(members))
