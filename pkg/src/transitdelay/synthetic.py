"""Reproducible synthetic networks with controllable headways."""

from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass, field

from .timetable import Network, TripRecord


@dataclass(frozen=True)
class SyntheticParams:
    stops: int = 120
    routes: int = 12                 # lines; each runs in both directions
    stops_per_route: tuple[int, int] = (6, 12)
    # (headway seconds, weight); lines get headways in proportion to the weights
    headways: tuple[tuple[int, float], ...] = ((300, 1.0), (600, 1.0))
    service_start: int = 12 * 3600
    service_end: int = 14 * 3600
    area_meters: float = 6000.0
    vehicle_speed: float = 8.0       # meters per second
    dwell: tuple[int, int] = (0, 30)
    walk_speed: float = 1.2
    walk_radius: float = 450.0
    extra_vertices: int = 0
    seed: int = 0


def allocate_headways(count: int, headways: tuple[tuple[int, float], ...]) -> list[int]:
    """Largest-remainder apportionment of `count` lines to the weighted headways."""
    if count == 0:
        return []
    total = sum(w for _, w in headways)
    if total <= 0:
        raise ValueError("headway weights must sum to a positive value")
    quotas = [count * w / total for _, w in headways]
    taken = [math.floor(q) for q in quotas]
    order = sorted(range(len(headways)), key=lambda k: (taken[k] - quotas[k], k))
    for k in order[: count - sum(taken)]:
        taken[k] += 1
    out = []
    for (headway, _), n in zip(headways, taken):
        out.extend([headway] * n)
    return out


def _walk_route(rng: random.Random, points: list[tuple[float, float]], length: int) -> list[int]:
    """Random walk through near neighbours that keeps heading roughly the same way."""
    start = rng.randrange(len(points))
    route = [start]
    heading = rng.uniform(0, 2 * math.pi)
    while len(route) < length:
        x, y = points[route[-1]]
        best, best_score = None, math.inf
        for v, (px, py) in enumerate(points):
            if v in route:
                continue
            dx, dy = px - x, py - y
            d = math.hypot(dx, dy)
            off = abs((math.atan2(dy, dx) - heading + math.pi) % (2 * math.pi) - math.pi)
            score = d * (1.0 + off) * rng.uniform(0.8, 1.2)
            if score < best_score:
                best, best_score = v, score
        if best is None:
            break
        bx, by = points[best]
        heading = math.atan2(by - y, bx - x)
        route.append(best)
    return route


def gen_synthetic_network(params: SyntheticParams = SyntheticParams()) -> Network:
    rng = random.Random(params.seed)
    vertex_total = params.stops + params.extra_vertices
    points = [(rng.uniform(0, params.area_meters), rng.uniform(0, params.area_meters)) for _ in range(vertex_total)]
    stop_points = points[: params.stops]
    records: list[TripRecord] = []
    low, high = params.stops_per_route
    high = min(high, params.stops)
    for line, headway in enumerate(allocate_headways(params.routes, params.headways)):
        length = rng.randint(min(low, high), high)
        if length < 2:
            continue
        sequence = _walk_route(rng, stop_points, length)
        offset = rng.randrange(headway)
        for direction, stops in enumerate((sequence, sequence[::-1])):
            runs = []
            for a, b in zip(stops, stops[1:]):
                runs.append(max(30, round(math.dist(stop_points[a], stop_points[b]) / params.vehicle_speed)))
            dwells = [rng.randint(*params.dwell) for _ in stops]
            start = params.service_start + (offset + direction * headway // 2) % headway
            k = 0
            while start <= params.service_end:
                t = start
                arrivals, departures = [], []
                for i in range(len(stops)):
                    if i:
                        t += runs[i - 1]
                    arrivals.append(t)
                    t += dwells[i] if 0 < i < len(stops) - 1 else 0
                    departures.append(t)
                records.append(TripRecord(f"R{line}{'ab'[direction]}.{k}", tuple(stops), tuple(arrivals), tuple(departures)))
                start += headway
                k += 1
    edges = []
    for u in range(vertex_total):
        for v in range(u + 1, vertex_total):
            d = math.dist(points[u], points[v])
            if d <= params.walk_radius:
                w = max(1, round(d / params.walk_speed))
                edges.append((u, v, w))
                edges.append((v, u, w))
    names = [f"S{v}" for v in range(params.stops)]
    return Network(names, records, edges, vertex_count=vertex_total)


def headway_histogram(network: Network) -> Counter:
    """Headway (seconds between consecutive first departures) of every line direction."""
    by_name: dict[str, list[int]] = {}
    for t, name in enumerate(network.trip_names):
        by_name.setdefault(name.split(".")[0], []).append(network.event_dep[network.trip_first[t]])
    out: Counter = Counter()
    for deps in by_name.values():
        deps.sort()
        if len(deps) > 1:
            out[deps[1] - deps[0]] += 1
    return out
