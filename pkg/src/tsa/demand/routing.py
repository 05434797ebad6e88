"""Free-flow shortest paths over the road graph.

Nodes are roads; two roads are adjacent when a junction movement links
them.  A path's cost is the sum of free-flow traversal times of every road
on it, first and last included.
"""

from __future__ import annotations

import heapq

from tsa.errors import Unreachable
from tsa.netmodel.model import RoadNetwork


def shortest_paths_from(net: RoadNetwork, from_road: str) -> dict[str, tuple[float, tuple[str, ...]]]:
    """Dijkstra from ``from_road`` to every reachable road.

    Labels are ``(cost, path)`` pairs compared lexicographically, which
    resolves equal-cost ties by the road-id sequence.
    """
    if from_road not in net.road_index:
        raise KeyError(from_road)
    roads = net.road_index
    start = (roads[from_road].free_flow_time, (from_road,))
    heap = [start]
    best: dict[str, tuple[float, tuple[str, ...]]] = {}
    while heap:
        cost, path = heapq.heappop(heap)
        here = path[-1]
        if here in best:
            continue
        best[here] = (cost, path)
        for nxt in net.successors(here):
            if nxt not in best:
                heapq.heappush(heap, (cost + roads[nxt].free_flow_time, path + (nxt,)))
    return best


def route(net: RoadNetwork, from_road: str, to_road: str) -> list[str]:
    for rid in (from_road, to_road):
        if rid not in net.road_index:
            raise KeyError(rid)
    found = shortest_paths_from(net, from_road).get(to_road)
    if found is None:
        raise Unreachable(f"no path from {from_road} to {to_road}")
    return list(found[1])


def path_cost(net: RoadNetwork, path) -> float:
    cost = 0.0
    for rid in path:
        cost += net.road_index[rid].free_flow_time
    return cost


def route_length(net: RoadNetwork, path) -> float:
    return sum(net.road_index[rid].length for rid in path)


class RouteCache:
    """Memoizes single-source trees; one instance per network."""

    def __init__(self, net: RoadNetwork):
        self.net = net
        self._trees: dict[str, dict] = {}

    def tree(self, from_road: str) -> dict[str, tuple[float, tuple[str, ...]]]:
        t = self._trees.get(from_road)
        if t is None:
            t = self._trees[from_road] = shortest_paths_from(self.net, from_road)
        return t

    def route(self, from_road: str, to_road: str) -> list[str]:
        found = self.tree(from_road).get(to_road)
        if found is None:
            raise Unreachable(f"no path from {from_road} to {to_road}")
        return list(found[1])

    def cost(self, from_road: str, to_road: str) -> float | None:
        found = self.tree(from_road).get(to_road)
        return None if found is None else found[0]
