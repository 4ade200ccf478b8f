"""Seeded tiny networks for oracle comparisons."""

from __future__ import annotations

import random

from transitdelay.delays import DelayUpdate
from transitdelay.timetable import Network, TripRecord


def tiny_network(seed: int, stops: int = 6, lines: int = 3, trips_per_line: int = 2,
                 max_len: int = 4, walk_edges: int = 5, extra_vertices: int = 0,
                 horizon: int = 30) -> Network:
    """Random network with small integer times so many events interact."""
    rng = random.Random(seed)
    records = []
    for line in range(lines):
        length = rng.randint(2, max_len)
        sequence = rng.sample(range(stops), length)
        for k in range(trips_per_line):
            t = rng.randint(0, horizon)
            arrivals, departures = [], []
            for i in range(length):
                if i:
                    t += rng.randint(1, 6)
                arrivals.append(t)
                t += rng.choice((0, 0, 1))
                departures.append(t)
            records.append(TripRecord(f"L{line}.{k}", tuple(sequence), tuple(arrivals), tuple(departures)))
    vertex_count = stops + extra_vertices
    edges = []
    for _ in range(walk_edges):
        u, v = rng.sample(range(vertex_count), 2)
        w = rng.randint(1, 6)
        edges.append((u, v, w))
        if rng.random() < 0.7:
            edges.append((v, u, w))
    return Network([f"S{v}" for v in range(stops)], records, edges, vertex_count=vertex_count)


def seconds_network(seed: int, max_stops: int = 40, max_events: int = 120) -> Network:
    """Random network on a seconds scale, at most `max_stops` stops and `max_events` stop events."""
    rng = random.Random(seed)
    stops = rng.randint(12, max_stops)
    records, events, line = [], 0, 0
    while True:
        length = rng.randint(3, 7)
        trips = rng.randint(1, 3)
        if events + length * trips > max_events:
            break
        sequence = rng.sample(range(stops), length)
        start = rng.randint(0, 900)
        runs = [rng.randint(60, 300) for _ in range(length - 1)]
        dwells = [rng.choice((0, 0, 30)) for _ in range(length)]
        for k in range(trips):
            t = start + k * rng.randint(120, 900)
            arrivals, departures = [], []
            for i in range(length):
                if i:
                    t += runs[i - 1]
                arrivals.append(t)
                t += dwells[i]
                departures.append(t)
            records.append(TripRecord(f"L{line}.{k}", tuple(sequence), tuple(arrivals), tuple(departures)))
        events += length * trips
        line += 1
    edges = []
    for _ in range(rng.randint(stops // 2, stops)):
        u, v = rng.sample(range(stops), 2)
        w = rng.randint(30, 400)
        edges += [(u, v, w), (v, u, w)]
    return Network([f"S{v}" for v in range(stops)], records, edges)


def bounded_update_batches(network: Network, max_delay: int, seed: int, batches: int = 2) -> list[list[DelayUpdate]]:
    """Updates with delays in [0, max_delay], constant from a random index onward, split into batches."""
    rng = random.Random(seed)
    out: list[list[DelayUpdate]] = [[] for _ in range(batches)]
    if max_delay == 0:
        return out
    for trip in range(network.trip_count):
        if rng.random() < 0.5:
            index = rng.randrange(network.trip_len[trip])
            update = DelayUpdate.uniform(network, trip, index, rng.randint(1, max_delay), 0)
            out[rng.randrange(batches)].append(update)
    return out


SPLIT_EXAMPLE_STOPS = ["s", "o", "d", "t", "s2", "o2", "d2", "t2"]
SPLIT_EXAMPLE_MAX_DELAY = 5


def split_example_network() -> Network:
    """Candidate s->o, d->t with a join witness via s2->o2 and a split witness via d2->t2."""
    at = {name: k for k, name in enumerate(SPLIT_EXAMPLE_STOPS)}
    trips = [
        TripRecord("T1", (at["s"], at["o"]), (0, 20), (0, 20)),
        TripRecord("T2", (at["d"], at["t"]), (19, 50), (19, 50)),
        TripRecord("T3", (at["s2"], at["o2"]), (6, 17), (6, 17)),
        TripRecord("T4", (at["d2"], at["t2"]), (24, 40), (24, 40)),
    ]
    edges = [(at["s"], at["s2"], 1), (at["o2"], at["d"], 1), (at["o"], at["d"], 1),
             (at["o"], at["d2"], 1), (at["t2"], at["t"], 1)]
    return Network(SPLIT_EXAMPLE_STOPS, trips, edges)


def _clock(text: str) -> int:
    hours, minutes = text.split(":")
    return int(hours) * 3600 + int(minutes) * 60


# One trip with arrival and departure times and the earliest witness arrivals at its
# stops using one trip (checked against departures) and two trips (checked against arrivals).
INDEX_EXAMPLE_ARRIVALS = [_clock(t) for t in ("9:00", "9:05", "9:08", "9:15", "9:20", "9:24")]
INDEX_EXAMPLE_DEPARTURES = [_clock(t) for t in ("9:02", "9:06", "9:10", "9:16", "9:21", "9:25")]
INDEX_EXAMPLE_ONE_TRIP_WITNESS = [_clock(t) for t in ("9:30", "8:54", "9:12", "9:18", "9:21", "9:07")]
INDEX_EXAMPLE_TWO_TRIP_WITNESS = [_clock(t) for t in ("8:50", "8:54", "9:12", "9:03", "9:21", "9:07")]
