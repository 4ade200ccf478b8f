"""Reference checks for journey laws, shared by the property tests and the acceptance suite.

Each checker takes a seeded random instance, evaluates one family of laws over every
journey it enumerates and returns the number of cases checked. Violations raise
AssertionError with enough context to reproduce them.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from transitdelay.delays import DelayScenario
from transitdelay.journeys import (
    PartialJourney,
    Transfer,
    arrival_profile,
    arrival_time,
    concatenate,
    dominates,
    enumerate_journeys,
)
from transitdelay.timetable import Network
from transitdelay.transfers import all_pairs

from instances import tiny_network

MAX_TRIPS = 2


@dataclass
class LawInstance:
    network: Network
    dist: list[list[int]]
    scenario: DelayScenario
    source: int
    departure: int
    rng: random.Random
    cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def draw(cls, seed: int) -> "LawInstance":
        rng = random.Random(seed)
        network = tiny_network(seed, stops=rng.randint(4, 6), lines=rng.randint(2, 3),
                               trips_per_line=rng.randint(1, 2), max_len=4, walk_edges=rng.randint(3, 6),
                               extra_vertices=rng.randint(0, 1))
        arrival = [rng.choice((0, 0, 0, 1, 2, 4)) for _ in range(network.event_count)]
        departure = [a + rng.choice((0, 0, 1)) for a in arrival]
        scenario = DelayScenario(arrival, departure)
        return cls(network, all_pairs(network.graph), scenario, rng.randrange(network.stop_count),
                   rng.randint(0, 20), rng)

    def journeys_to(self, target: int, max_trips: int = MAX_TRIPS) -> list[PartialJourney]:
        key = (target, max_trips)
        if key not in self.cache:
            self.cache[key] = enumerate_journeys(self.network, self.source, target, self.departure,
                                                 max_trips, self.scenario, self.dist)
        return self.cache[key]

    def all_journeys(self) -> list[PartialJourney]:
        out = []
        for v in range(self.network.vertex_count):
            out += [j for j in self.journeys_to(v) if j.legs]
        return out


# -- prefixes -----------------------------------------------------------------


def standard_prefixes(journey: PartialJourney) -> list[PartialJourney]:
    """Prefixes ending with a complete final transfer or with the boarding of the next trip."""
    out = []
    for k in range(len(journey.legs) + 1):
        out.append(PartialJourney(journey.transfers[:k + 1], journey.legs[:k]))
        if k < len(journey.legs):
            leg = journey.legs[k]
            out.append(PartialJourney(journey.transfers[:k + 1], journey.legs[:k], tail=(leg.trip, leg.enter)))
    return out


def nonstandard_prefixes(journey: PartialJourney, dist) -> list[PartialJourney]:
    """Prefixes whose final transfer stops at an intermediate vertex of a shortest path."""
    out = []
    for k in range(len(journey.legs) + 1):
        last = journey.transfers[k]
        for w in range(len(dist)):
            if w == last.target:
                continue
            if dist[last.source][w] + dist[w][last.target] == last.duration:
                out.append(PartialJourney(journey.transfers[:k] + (Transfer(last.source, w, dist[last.source][w]),),
                                          journey.legs[:k]))
    return out


def end_vertex(prefix: PartialJourney) -> int:
    return prefix.transfers[-1].target


def witnesses_for(instance: LawInstance, prefix: PartialJourney) -> list[PartialJourney]:
    """Every feasible partial journey of the same form as `prefix` with at most as many trips."""
    network = instance.network
    if prefix.tail is None:
        return instance.journeys_to(end_vertex(prefix), prefix.trips)
    trip, _ = prefix.tail
    out = []
    times_dep = instance.scenario.departure_times(network)
    first = network.trip_first[trip]
    for j in range(network.trip_len[trip] - 1):
        stop = network.event_stop[first + j]
        for w in instance.journeys_to(stop, prefix.trips - 1):
            if w.legs and w.legs[-1].trip == trip:
                continue
            if arrival_time(network, w, instance.scenario, instance.departure) <= times_dep[first + j]:
                out.append(PartialJourney(w.transfers, w.legs, tail=(trip, j)))
    return out


def dominating_witnesses(instance: LawInstance, prefix: PartialJourney) -> list[PartialJourney]:
    sc = instance.scenario
    return [w for w in witnesses_for(instance, prefix)
            if dominates(instance.network, w, prefix, True, sc, sc, instance.departure)]


def optimal_by_profile(instance: LawInstance, prefix: PartialJourney, profile) -> bool:
    """Pareto optimality of a prefix from round-based earliest arrivals and boarding indices."""
    n = prefix.trips
    if prefix.tail is None:
        v = end_vertex(prefix)
        a = arrival_time(instance.network, prefix, instance.scenario, instance.departure)
        if profile.arrivals[n][v] < a:
            return False
        return not (n >= 1 and profile.arrivals[n - 1][v] <= a)
    trip, i = prefix.tail
    if profile.boarding[n - 1][trip] < i:
        return False
    return not (n >= 2 and profile.boarding[n - 2][trip] <= i)


def profile_of(instance: LawInstance):
    return arrival_profile(instance.network, instance.source, instance.departure, MAX_TRIPS,
                           instance.scenario, instance.dist)


def hook_split(events_witness: list[int], events_prefix: list[int]) -> bool:
    """True if the witness events are a prefix of the prefix's events followed only by unshared events."""
    m = 0
    while m < min(len(events_witness), len(events_prefix)) and events_witness[m] == events_prefix[m]:
        m += 1
    shared = set(events_prefix)
    return not any(e in shared for e in events_witness[m:])


# -- law checkers ----------------------------------------------------------------


def check_concatenation(seed: int) -> int:
    """Splitting at a transfer vertex or inside a trip and rejoining restores the journey."""
    instance = LawInstance.draw(seed)
    network, dist, sc = instance.network, instance.dist, instance.scenario
    cases = 0
    for journey in instance.all_journeys():
        reference = arrival_time(network, journey, sc, instance.departure)
        for k, transfer in enumerate(journey.transfers):
            for w in range(network.vertex_count):
                if dist[transfer.source][w] + dist[w][transfer.target] != transfer.duration:
                    continue
                left = PartialJourney(journey.transfers[:k] + (Transfer(transfer.source, w, dist[transfer.source][w]),),
                                      journey.legs[:k])
                right = PartialJourney((Transfer(w, transfer.target, dist[w][transfer.target]),) + journey.transfers[k + 1:],
                                       journey.legs[k:])
                joined = concatenate(left, right)
                assert joined == journey, (seed, journey, w)
                assert joined.is_valid(network)
                assert arrival_time(network, joined, sc, instance.departure) == reference
                cases += 1
        for k, leg in enumerate(journey.legs):
            for cut in range(leg.enter + 1, leg.exit + 1):
                left = PartialJourney(journey.transfers[:k + 1], journey.legs[:k], tail=(leg.trip, leg.enter))
                right = PartialJourney(journey.transfers[k + 1:], journey.legs[k + 1:], head=(leg.trip, leg.exit))
                joined = concatenate(left, right)
                assert joined == journey and joined.trips == left.trips + right.trips - 1
                assert arrival_time(network, right, sc) == reference
                assert left.is_valid(network) and right.is_valid(network)
                bad_right = PartialJourney(right.transfers, right.legs, head=(leg.trip, leg.enter))
                try:
                    concatenate(left, bad_right)
                except ValueError:
                    pass
                else:
                    raise AssertionError("segment join accepted a non-increasing index pair")
                cases += 1
        last = journey.legs[-1]
        exit_stop = network.event_stop[network.trip_first[last.trip] + last.exit]
        expected = network.event_arr[network.trip_first[last.trip] + last.exit] + sc.arr_delay(
            network.trip_first[last.trip] + last.exit) + journey.transfers[-1].duration
        assert reference == expected and journey.transfers[-1].source == exit_stop
    return cases


def check_prefix_optimality(seed: int) -> int:
    """All-prefixes optimality (by enumeration) agrees with standard-prefix optimality (by profile)."""
    instance = LawInstance.draw(seed)
    profile = profile_of(instance)
    cases = 0
    for journey in instance.all_journeys():
        standard = standard_prefixes(journey)
        every = standard + nonstandard_prefixes(journey, instance.dist)
        by_profile = all(optimal_by_profile(instance, p, profile) for p in standard)
        by_enumeration = all(not dominating_witnesses(instance, p) for p in every)
        assert by_profile == by_enumeration, (seed, journey)
        for p in standard:
            assert optimal_by_profile(instance, p, profile) == (not dominating_witnesses(instance, p)), (seed, p)
        cases += 1
    return cases


def check_hook_witnesses(seed: int, violations: list | None = None) -> int:
    """Some prefix has a dominating witness iff some prefix has a dominating hook witness; hooks avoid the last event.

    Journeys breaking the equivalence are appended to `violations` when given, else raise.
    """
    instance = LawInstance.draw(seed)
    network = instance.network
    cases = 0
    for journey in instance.all_journeys():
        any_witness = any_hook = False
        for prefix in standard_prefixes(journey):
            prefix_events = prefix.events(network)
            dominating = dominating_witnesses(instance, prefix)
            hooks = [w for w in dominating if hook_split(w.events(network), prefix_events)]
            any_witness |= bool(dominating)
            any_hook |= bool(hooks)
            if prefix_events:
                for w in hooks:
                    assert prefix_events[-1] not in w.events(network), (seed, prefix, w)
                    cases += 1
        if any_witness != any_hook:
            if violations is None:
                raise AssertionError((seed, journey))
            violations.append((seed, journey))
        cases += 1
    return cases


def shifted(scenario: DelayScenario, rng: random.Random, sign: int) -> DelayScenario:
    """Scenario with every delay moved by a random non-negative amount in direction `sign`."""
    arrival, departure = [], []
    for a, d in zip(scenario.arrival_delay, scenario.departure_delay):
        step = rng.choice((0, 0, 1, 3))
        arrival.append(max(0, a + sign * step))
        departure.append(max(0, d + sign * step))
    return DelayScenario(arrival, departure)


def check_dominance_monotonicity(seed: int) -> int:
    """Strong dominance in (candidate, witness) survives later candidates and earlier witnesses."""
    instance = LawInstance.draw(seed)
    network, rng = instance.network, instance.rng
    journeys = instance.all_journeys()
    cases = 0
    for journey in journeys:
        for prefix in standard_prefixes(journey):
            pool = witnesses_for(instance, prefix) + [prefix]
            for witness in rng.sample(pool, min(4, len(pool))):
                candidate1, witness1 = instance.scenario, shifted(instance.scenario, rng, 1)
                candidate2, witness2 = shifted(candidate1, rng, 1), shifted(witness1, rng, -1)
                before = dominates(network, witness, prefix, True, witness1, candidate1, instance.departure)
                after = dominates(network, witness, prefix, True, witness2, candidate2, instance.departure)
                assert not before or after, (seed, prefix, witness)
                weak_before = dominates(network, witness, prefix, False, witness1, candidate1, instance.departure)
                assert not before or weak_before
                cases += 1
    return cases


def check_pareto_filter(seed: int) -> int:
    """Filter output equals the quadratic pairwise filter on random label multisets."""
    from transitdelay.journeys import ParetoLabel, pareto_filter

    rng = random.Random(seed)
    labels = [ParetoLabel(rng.randint(0, 12), rng.randint(0, 4)) for _ in range(rng.randint(1, 12))]
    kept = pareto_filter(labels)
    expected = set()
    for a in labels:
        if not any((b.arrival <= a.arrival and b.trips <= a.trips) and (b.arrival, b.trips) != (a.arrival, a.trips)
                   for b in labels):
            expected.add(a)
    assert set(kept) == expected and len(kept) == len(expected), (labels, kept)
    return 1


LAWS = {
    "concatenation": check_concatenation,
    "prefix_optimality": check_prefix_optimality,
    "hook_witnesses": check_hook_witnesses,
    "dominance_monotonicity": check_dominance_monotonicity,
}

