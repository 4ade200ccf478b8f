"""Delay scenarios, analytic overlays, delay updates and the synthetic update generator."""

from __future__ import annotations

import enum
import hashlib
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol, Sequence

from .timetable import Network


class DelaySource(Protocol):
    def arr_delay(self, event: int) -> int: ...

    def dep_delay(self, event: int) -> int: ...


class DelayScenario:
    """Concrete per-event delays. Treated as an immutable value."""

    __slots__ = ("arrival_delay", "departure_delay")

    def __init__(self, arrival_delay: Sequence[int], departure_delay: Sequence[int]):
        if len(arrival_delay) != len(departure_delay):
            raise ValueError("delay arrays differ in length")
        self.arrival_delay = list(arrival_delay)
        self.departure_delay = list(departure_delay)

    @classmethod
    def punctual(cls, event_count: int) -> "DelayScenario":
        return cls([0] * event_count, [0] * event_count)

    def arr_delay(self, event: int) -> int:
        return self.arrival_delay[event]

    def dep_delay(self, event: int) -> int:
        return self.departure_delay[event]

    def arrival_times(self, network: Network) -> list[int]:
        return [a + d for a, d in zip(network.event_arr, self.arrival_delay)]

    def departure_times(self, network: Network) -> list[int]:
        return [a + d for a, d in zip(network.event_dep, self.departure_delay)]

    def max_delay(self) -> int:
        return max(max(self.arrival_delay, default=0), max(self.departure_delay, default=0))

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, DelayScenario)
            and self.arrival_delay == other.arrival_delay
            and self.departure_delay == other.departure_delay
        )

    def __repr__(self) -> str:
        delayed = sum(1 for a, d in zip(self.arrival_delay, self.departure_delay) if a or d)
        return f"DelayScenario(events={len(self.arrival_delay)}, delayed={delayed})"


# -- overlays ---------------------------------------------------------------


class BestCase:
    """No arrival delay, maximal departure delay everywhere."""

    def __init__(self, max_delay: int):
        self.max_delay = max_delay

    def arr_delay(self, event: int) -> int:
        return 0

    def dep_delay(self, event: int) -> int:
        return self.max_delay


class WorstCase:
    """Maximal arrival delay, no departure delay everywhere."""

    def __init__(self, max_delay: int):
        self.max_delay = max_delay

    def arr_delay(self, event: int) -> int:
        return self.max_delay

    def dep_delay(self, event: int) -> int:
        return 0


class BestCaseFor:
    """Best case on the given events, worst case on all others."""

    def __init__(self, max_delay: int, events: Iterable[int]):
        self.max_delay = max_delay
        self.events = frozenset(events)

    def arr_delay(self, event: int) -> int:
        return 0 if event in self.events else self.max_delay

    def dep_delay(self, event: int) -> int:
        return self.max_delay if event in self.events else 0


class Parameterized(BestCaseFor):
    """BestCaseFor(events) with the origin's arrival delay pinned to `delta`."""

    def __init__(self, max_delay: int, events: Iterable[int], origin: int, delta: int):
        super().__init__(max_delay, events)
        self.origin = origin
        self.delta = delta

    def arr_delay(self, event: int) -> int:
        if event == self.origin:
            return self.delta
        return super().arr_delay(event)


class TimeTravel:
    """Departures as BestCaseFor(prefix_events); arrivals worst case except before `index` on `trip`.

    Earlier events of the trip get arrival delay min(max_delay, arr(trip[index]) - arr(trip[j])),
    the largest delay that does not make the vehicle arrive there after trip[index].
    """

    def __init__(self, max_delay: int, network: Network, trip: int, index: int, prefix_events: Iterable[int]):
        self.max_delay = max_delay
        self.prefix_events = frozenset(prefix_events)
        first = network.trip_first[trip]
        anchor = network.event_arr[first + index]
        self._arrival = {
            first + j: min(max_delay, anchor - network.event_arr[first + j]) for j in range(index)
        }

    def arr_delay(self, event: int) -> int:
        return self._arrival.get(event, self.max_delay)

    def dep_delay(self, event: int) -> int:
        return self.max_delay if event in self.prefix_events else 0


def eval_time(network: Network, source: DelaySource, event: int, which: str) -> int:
    if which == "arrival":
        return network.event_arr[event] + source.arr_delay(event)
    if which == "departure":
        return network.event_dep[event] + source.dep_delay(event)
    raise ValueError(f"unknown time kind {which!r}")


def materialize(source: DelaySource, event_count: int) -> DelayScenario:
    return DelayScenario(
        [source.arr_delay(e) for e in range(event_count)],
        [source.dep_delay(e) for e in range(event_count)],
    )


class Comparison(enum.Enum):
    A_BETTER_EQ = "aBetterEq"
    B_BETTER_EQ = "bBetterEq"
    EQUAL = "equal"
    INCOMPARABLE = "incomparable"


def compare_scenarios(a: DelaySource, b: DelaySource, event_count: int) -> Comparison:
    """Partial order: a is better-or-equal if it departs no earlier and arrives no later everywhere."""
    a_le = b_le = True
    for e in range(event_count):
        ad, bd = a.dep_delay(e), b.dep_delay(e)
        aa, ba = a.arr_delay(e), b.arr_delay(e)
        if not (ad >= bd and aa <= ba):
            a_le = False
        if not (bd >= ad and ba <= aa):
            b_le = False
        if not (a_le or b_le):
            return Comparison.INCOMPARABLE
    if a_le and b_le:
        return Comparison.EQUAL
    return Comparison.A_BETTER_EQ if a_le else Comparison.B_BETTER_EQ


# -- updates ----------------------------------------------------------------


@dataclass(frozen=True)
class DelayUpdate:
    trip: int
    first_index: int
    arrival_delays: tuple[int, ...]
    departure_delays: tuple[int, ...]
    reveal_time: int

    @classmethod
    def uniform(cls, network: Network, trip: int, first_index: int, delay: int, reveal_time: int) -> "DelayUpdate":
        n = network.trip_len[trip] - first_index
        return cls(trip, first_index, (delay,) * n, (delay,) * n, reveal_time)


def apply_update(scenario: DelayScenario, update: DelayUpdate, network: Network) -> DelayScenario:
    if not 0 <= update.trip < network.trip_count:
        raise ValueError(f"update references unknown trip {update.trip}")
    length = network.trip_len[update.trip]
    if not 0 <= update.first_index < length:
        raise ValueError(f"first index {update.first_index} out of range for trip {update.trip}")
    count = length - update.first_index
    if len(update.arrival_delays) != count or len(update.departure_delays) != count:
        raise ValueError("update must specify delays for every event from its first index on")
    if min(update.arrival_delays + update.departure_delays) < 0:
        raise ValueError("delays cannot be negative")
    arr = list(scenario.arrival_delay)
    dep = list(scenario.departure_delay)
    first = network.trip_first[update.trip] + update.first_index
    arr[first:first + count] = update.arrival_delays
    dep[first:first + count] = update.departure_delays
    return DelayScenario(arr, dep)


def apply_updates(scenario: DelayScenario, updates: Iterable[DelayUpdate], network: Network) -> DelayScenario:
    for update in updates:
        scenario = apply_update(scenario, update, network)
    return scenario


class DelayStream:
    """Delay updates ordered by reveal time."""

    def __init__(self, updates: Iterable[DelayUpdate]):
        self.updates = tuple(sorted(updates, key=lambda u: u.reveal_time))

    def __len__(self) -> int:
        return len(self.updates)

    def __iter__(self):
        return iter(self.updates)

    def revealed_between(self, start: int, end: int) -> list[DelayUpdate]:
        """Updates with start < reveal_time <= end."""
        return [u for u in self.updates if start < u.reveal_time <= end]

    def to_lines(self, network: Network) -> list[str]:
        lines = []
        for u in self.updates:
            pairs = ",".join(f"{a},{d}" for a, d in zip(u.arrival_delays, u.departure_delays))
            lines.append(f"{network.trip_names[u.trip]},{u.first_index},{u.reveal_time},{pairs}")
        return lines

    def digest(self, network: Network) -> str:
        return hashlib.sha256("\n".join(self.to_lines(network)).encode()).hexdigest()

    def save(self, network: Network, path: str | Path) -> None:
        Path(path).write_text("".join(line + "\n" for line in self.to_lines(network)), encoding="utf-8")

    @classmethod
    def load(cls, network: Network, path: str | Path) -> "DelayStream":
        updates = []
        for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            fields = line.split(",")
            if len(fields) < 5 or (len(fields) - 3) % 2:
                raise ValueError(f"{path}:{n}: malformed delay record")
            trip = network.trip_by_name(fields[0])
            values = [int(x) for x in fields[1:]]
            first, reveal, pairs = values[0], values[1], values[2:]
            updates.append(DelayUpdate(trip, first, tuple(pairs[0::2]), tuple(pairs[1::2]), reveal))
        return cls(updates)


# -- synthetic generator ------------------------------------------------------

# (share, low minutes exclusive, high minutes inclusive); the first bucket is "no delay".
UPDATE_DISTRIBUTION: tuple[tuple[float, int, int], ...] = (
    (0.50, 0, 0),
    (0.30, 0, 3),
    (0.10, 3, 5),
    (0.06, 5, 10),
    (0.02, 10, 15),
    (0.01, 15, 20),
    (0.006, 20, 30),
    (0.004, 30, 60),
)


def draw_update_delay(rng: random.Random) -> int:
    """One update magnitude in seconds; 0 means the update is discarded."""
    u = rng.random()
    acc = 0.0
    for share, low, high in UPDATE_DISTRIBUTION:
        acc += share
        if u < acc:
            break
    if high == 0:
        return 0
    return rng.randint(low * 60 + 1, high * 60)


def delay_bucket(seconds: int) -> int:
    """Index into UPDATE_DISTRIBUTION for a drawn magnitude."""
    if seconds <= 0:
        return 0
    for k, (_, low, high) in enumerate(UPDATE_DISTRIBUTION[1:], start=1):
        if low * 60 < seconds <= high * 60:
            return k
    raise ValueError(f"{seconds}s lies outside the update distribution")


def generate_delay_stream(network: Network, window_start: int, window_end: int, seed: int) -> DelayStream:
    """At most one update per trip, applied from a uniformly chosen stop onward."""
    if window_start >= window_end:
        raise ValueError("window start must precede window end")
    rng = random.Random(seed)
    updates = []
    for trip in range(network.trip_count):
        length = network.trip_len[trip]
        first_event = network.trip_first[trip]
        index = rng.randrange(length)
        delay = draw_update_delay(rng)
        if delay == 0:
            continue
        reveal = network.event_arr[first_event + index]
        if reveal > window_end:
            continue
        start = index
        if reveal < window_start:
            while start < length and network.event_arr[first_event + start] < window_start:
                start += 1
            if start == length:
                continue
        n = length - start
        updates.append(DelayUpdate(trip, start, (delay,) * n, (delay,) * n, reveal))
    return DelayStream(updates)


def capped_scenario(network: Network, max_delay: int, seed: int, delayed_share: float = 0.5) -> DelayScenario:
    """Random delays within [0, max_delay], constant from a random index onward per delayed trip.

    Delays never decrease along a trip, so no vehicle arrives somewhere earlier
    than at a preceding stop relative to the schedule.
    """
    rng = random.Random(seed)
    arr = [0] * network.event_count
    for trip in range(network.trip_count):
        if rng.random() >= delayed_share or max_delay == 0:
            continue
        index = rng.randrange(network.trip_len[trip])
        delay = rng.randint(1, max_delay)
        first = network.trip_first[trip]
        for e in range(first + index, first + network.trip_len[trip]):
            arr[e] = delay
    return DelayScenario(arr, list(arr))
