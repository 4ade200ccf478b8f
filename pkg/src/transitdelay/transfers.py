"""Shortest paths on the transfer graph."""

from __future__ import annotations

from heapq import heappop, heappush

from .timetable import TransferGraph

INFINITY = 2**62


def one_to_many(graph: TransferGraph, source: int, backward: bool = False) -> list[int]:
    """Distances from `source` to every vertex (to `source` from every vertex if backward)."""
    adjacency = graph.in_edges if backward else graph.out_edges
    dist = [INFINITY] * graph.vertex_count
    dist[source] = 0
    heap = [(0, source)]
    while heap:
        d, v = heappop(heap)
        if d > dist[v]:
            continue
        for w, length in adjacency[v]:
            nd = d + length
            if nd < dist[w]:
                dist[w] = nd
                heappush(heap, (nd, w))
    return dist


def reachable(graph: TransferGraph, source: int, backward: bool = False) -> dict[int, int]:
    """Like `one_to_many` but only for reachable vertices, which is cheaper on sparse graphs."""
    adjacency = graph.in_edges if backward else graph.out_edges
    dist = {source: 0}
    heap = [(0, source)]
    while heap:
        d, v = heappop(heap)
        if d > dist[v]:
            continue
        for w, length in adjacency[v]:
            nd = d + length
            if nd < dist.get(w, INFINITY):
                dist[w] = nd
                heappush(heap, (nd, w))
    return dist


def all_pairs(graph: TransferGraph) -> list[list[int]]:
    return [one_to_many(graph, v) for v in range(graph.vertex_count)]


class DistanceCache:
    """Lazily computed one-to-many distance rows, keyed by source vertex."""

    def __init__(self, graph: TransferGraph):
        self.graph = graph
        self._rows: dict[int, list[int]] = {}

    def row(self, source: int) -> list[int]:
        row = self._rows.get(source)
        if row is None:
            row = self._rows[source] = one_to_many(self.graph, source)
        return row

    def __call__(self, u: int, v: int) -> int:
        return self.row(u)[v]


class StopDistanceIndex:
    """Reachable-vertex distance maps per vertex, computed on first use and kept.

    Maps are ordered by vertex id, so stops (the low ids) come first. The transfer
    graph does not change with delays, so one index serves every snapshot of a network.
    """

    def __init__(self, graph: TransferGraph):
        self.graph = graph
        self._forward: dict[int, dict[int, int]] = {}
        self._backward: dict[int, dict[int, int]] = {}

    def from_vertex(self, vertex: int) -> dict[int, int]:
        row = self._forward.get(vertex)
        if row is None:
            row = self._forward[vertex] = dict(sorted(reachable(self.graph, vertex).items()))
        return row

    def to_vertex(self, vertex: int) -> dict[int, int]:
        row = self._backward.get(vertex)
        if row is None:
            row = self._backward[vertex] = dict(sorted(reachable(self.graph, vertex, backward=True).items()))
        return row

    def precompute(self) -> "StopDistanceIndex":
        for v in range(self.graph.vertex_count):
            self.from_vertex(v)
            self.to_vertex(v)
        return self
