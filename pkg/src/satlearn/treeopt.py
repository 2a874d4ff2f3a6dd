"""Routing-tree optimization on the inter-plane graph.

The minimum-diameter spanning tree is obtained through the absolute
1-center reduction: find the point on the edge continuum minimizing the
maximum shortest-path distance to every vertex, then return the shortest
path tree rooted there. A spanning-tree enumeration oracle validates the
reduction on small graphs.
"""

from __future__ import annotations

import heapq
import itertools
import json
from dataclasses import dataclass

import numpy as np

from .connectivity import InterPlaneGraph
from .errors import TopologyError


@dataclass(frozen=True)
class CenterCandidate:
    """A point on `host_edge` at `offset` from its first endpoint."""

    host_edge: tuple[int, int]
    offset: float
    radius: float


@dataclass(frozen=True, eq=False)
class RoutingTree:
    n_vertices: int
    edges: tuple[tuple[int, int], ...]
    hop_delay: np.ndarray  # tau: min hops - 1 off-diagonal, 0 on diagonal
    tau_max: int
    hop_diameter: int
    weighted_diameter: float | None = None

    def neighbors(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n_vertices)]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        for lst in adj:
            lst.sort()
        return adj

    def to_json_dict(self) -> dict:
        return {
            "n_vertices": self.n_vertices,
            "edges": [list(e) for e in self.edges],
            "tau_max": self.tau_max,
            "hop_diameter": self.hop_diameter,
            "tau_tilde": self.tau_max + 1,
            "weighted_diameter": self.weighted_diameter,
        }

    def save_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def to_dot(self) -> str:
        lines = ["graph routingtree {"]
        for v in range(self.n_vertices):
            lines.append(f"  {v} [label=\"plane {v}\"];")
        for i, j in self.edges:
            lines.append(f"  {i} -- {j};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def tree_from_edges(
    n_vertices: int,
    edges,
    weights: dict[tuple[int, int], float] | None = None,
) -> RoutingTree:
    """Assemble a RoutingTree (tau, diameters) from an explicit edge list."""
    edges = tuple(sorted(tuple(sorted(e)) for e in edges))
    if len(edges) != n_vertices - 1:
        raise TopologyError(f"{len(edges)} edges cannot span {n_vertices} vertices")
    hops = _hop_matrix(n_vertices, edges)
    if hops.max(initial=0) >= n_vertices + 1:
        raise TopologyError("edge list does not form a connected tree")
    tau = np.maximum(hops - 1, 0)
    hop_diameter = int(hops.max(initial=0))
    weighted = None
    if weights is not None:
        weighted = _tree_weighted_diameter(n_vertices, edges, weights)
    return RoutingTree(
        n_vertices=n_vertices,
        edges=edges,
        hop_delay=tau,
        tau_max=int(tau.max(initial=0)),
        hop_diameter=hop_diameter,
        weighted_diameter=weighted,
    )


def load_tree_json(path) -> RoutingTree:
    with open(path) as fh:
        data = json.load(fh)
    return tree_from_edges(data["n_vertices"], [tuple(e) for e in data["edges"]])


def hop_delays(tree: RoutingTree) -> np.ndarray:
    """tau matrix: minimum network hops minus one, zero on the diagonal."""
    return tree.hop_delay.copy()


def _hop_matrix(n: int, edges) -> np.ndarray:
    adj: list[list[int]] = [[] for _ in range(n)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    hops = np.full((n, n), n + 1, dtype=np.int64)
    for src in range(n):
        hops[src, src] = 0
        queue = [src]
        while queue:
            nxt = []
            for v in queue:
                for w in adj[v]:
                    if hops[src, w] > hops[src, v] + 1:
                        hops[src, w] = hops[src, v] + 1
                        nxt.append(w)
            queue = nxt
    return hops


def _tree_weighted_diameter(n: int, edges, weights: dict[tuple[int, int], float]) -> float:
    adj: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    for i, j in edges:
        w = weights[(i, j)] if (i, j) in weights else weights[(j, i)]
        adj[i].append((j, w))
        adj[j].append((i, w))
    diameter = 0.0
    for src in range(n):
        dist = [-1.0] * n
        dist[src] = 0.0
        stack = [src]
        while stack:
            v = stack.pop()
            for u, w in adj[v]:
                if dist[u] < 0:
                    dist[u] = dist[v] + w
                    stack.append(u)
        diameter = max(diameter, max(dist))
    return diameter


def _adjacency(graph: InterPlaneGraph) -> list[list[tuple[int, float]]]:
    adj: list[list[tuple[int, float]]] = [[] for _ in range(graph.n_planes)]
    for e in graph.edges:
        i, j = e.planes
        adj[i].append((j, e.weight))
        adj[j].append((i, e.weight))
    for lst in adj:
        lst.sort()
    return adj


def _dijkstra(adj: list[list[tuple[int, float]]], source: int) -> tuple[list[float], list[int]]:
    n = len(adj)
    dist = [float("inf")] * n
    parent = [-1] * n
    dist[source] = 0.0
    heap = [(0.0, source)]
    done = [False] * n
    while heap:
        d, v = heapq.heappop(heap)
        if done[v]:
            continue
        done[v] = True
        for u, w in adj[v]:
            nd = d + w
            if nd < dist[u]:
                dist[u] = nd
                parent[u] = v
                heapq.heappush(heap, (nd, u))
    return dist, parent


def _all_pairs_shortest_paths(graph: InterPlaneGraph) -> np.ndarray:
    adj = _adjacency(graph)
    n = graph.n_planes
    dist = np.empty((n, n))
    for src in range(n):
        dist[src], _ = _dijkstra(adj, src)
    return dist


def _require_connected(graph: InterPlaneGraph) -> None:
    if not graph.is_connected():
        raise TopologyError(f"graph is disconnected: components {graph.components()}")


def spanning_trees(graph: InterPlaneGraph):
    """Yield every spanning tree as a sorted tuple of edges (small graphs only)."""
    n = graph.n_planes
    edges = sorted(e.planes for e in graph.edges)
    m = len(edges)

    def find(parent, x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def rec(idx: int, chosen: list[tuple[int, int]], parent: list[int]):
        if len(chosen) == n - 1:
            yield tuple(chosen)
            return
        if m - idx < (n - 1) - len(chosen):
            return
        for k in range(idx, m):
            i, j = edges[k]
            ri, rj = find(parent, i), find(parent, j)
            if ri == rj:
                continue
            nxt = parent.copy()
            nxt[ri] = rj
            chosen.append(edges[k])
            yield from rec(k + 1, chosen, nxt)
            chosen.pop()

    yield from rec(0, [], list(range(n)))


def brute_force_mdst(graph: InterPlaneGraph, use_hop_weights: bool = False) -> RoutingTree:
    """Enumerate all spanning trees and return one of minimum weighted diameter.

    Ties are broken by the lexicographically smallest sorted edge list. The
    vertex budget is capped at 9 to keep the enumeration tractable.
    """
    _require_connected(graph)
    n = graph.n_planes
    if n > 9:
        raise ValueError(f"brute-force enumeration refused for {n} > 9 vertices")
    if n == 1:
        return tree_from_edges(1, [], {})
    weights = (
        {e.planes: 1.0 for e in graph.edges} if use_hop_weights else graph.weight_map()
    )
    best: tuple[float, tuple[tuple[int, int], ...]] | None = None
    for tree_edges in spanning_trees(graph):
        diam = _tree_weighted_diameter(n, tree_edges, weights)
        key = (diam, tree_edges)
        if best is None or key < best:
            best = key
    if best is None:
        raise TopologyError("no spanning tree found")
    return tree_from_edges(n, best[1], graph.weight_map())


def absolute_one_center(graph: InterPlaneGraph) -> CenterCandidate:
    """Minimize C(p) = max_v d(p, v) over the continuum of edge points.

    On each edge (a, b) the distance-to-vertex functions are piecewise linear
    with slopes +-1 (in the edge coordinate), so the upper envelope attains
    its minimum either at an endpoint or where two of them intersect:
    d(a,p) + x = d(b,q) + (w - x). Only those finitely many offsets are
    examined.
    """
    _require_connected(graph)
    n = graph.n_planes
    if n == 1:
        return CenterCandidate(host_edge=(0, 0), offset=0.0, radius=0.0)
    dist = _all_pairs_shortest_paths(graph)

    best: CenterCandidate | None = None
    for edge_idx, e in enumerate(sorted(graph.edges, key=lambda e: e.planes)):
        a, b = e.planes
        w = e.weight
        offsets = {0.0, w}
        for p in range(n):
            for q in range(n):
                x = (dist[b, q] + w - dist[a, p]) / 2.0
                if 0.0 <= x <= w:
                    offsets.add(x)
        for x in sorted(offsets):
            radius = max(min(x + dist[a, v], (w - x) + dist[b, v]) for v in range(n))
            if best is None or radius < best.radius:
                best = CenterCandidate(host_edge=(a, b), offset=x, radius=radius)
    assert best is not None
    return best


def a1cp_mdst(graph: InterPlaneGraph) -> RoutingTree:
    """Minimum-diameter spanning tree via the absolute 1-center reduction.

    The shortest-path tree is grown from the center point; when the center
    sits strictly inside an edge, the trees hanging off both endpoints are
    merged through that edge.
    """
    _require_connected(graph)
    n = graph.n_planes
    if n == 1:
        return tree_from_edges(1, [], {})
    center = absolute_one_center(graph)
    a, b = center.host_edge
    w = dict(((e.planes), e.weight) for e in graph.edges)[(a, b)]

    # Dijkstra from a virtual node splitting (a, b) at the center offset.
    adj = _adjacency(graph)
    virtual = n
    vadj = [list(lst) for lst in adj] + [[]]
    # Replace edge (a, b) by the two half-edges through the virtual center.
    vadj[a] = [(u, wt) for u, wt in vadj[a] if u != b] + [(virtual, center.offset)]
    vadj[b] = [(u, wt) for u, wt in vadj[b] if u != a] + [(virtual, w - center.offset)]
    vadj[virtual] = [(a, center.offset), (b, w - center.offset)]
    _, parent = _dijkstra(vadj, virtual)

    tree_edges = set()
    for v in range(n):
        p = parent[v]
        if p == virtual:
            continue
        if p >= 0:
            tree_edges.add(tuple(sorted((v, p))))
    # Splice the host edge back in place of the virtual paths. When only one
    # endpoint was reached through the virtual node the other endpoint hangs
    # off the rest of the tree already, and (a, b) would close a cycle.
    roots = [v for v in (a, b) if parent[v] == virtual]
    if len(roots) == 2:
        tree_edges.add(tuple(sorted((a, b))))
    tree = tree_from_edges(n, sorted(tree_edges), graph.weight_map())
    assert tree.weighted_diameter is not None
    assert tree.weighted_diameter <= 2.0 * center.radius + 1e-9
    return tree


def chain_tree(graph: InterPlaneGraph) -> RoutingTree:
    """Hamiltonian-path baseline tree, found by deterministic backtracking."""
    _require_connected(graph)
    n = graph.n_planes
    if n == 1:
        return tree_from_edges(1, [], {})
    adj = graph.neighbors()

    def extend(path: list[int], visited: set[int]):
        if len(path) == n:
            return path
        for nxt in adj[path[-1]]:
            if nxt in visited:
                continue
            visited.add(nxt)
            path.append(nxt)
            result = extend(path, visited)
            if result is not None:
                return result
            path.pop()
            visited.remove(nxt)
        return None

    for start in range(n):
        found = extend([start], {start})
        if found is not None:
            edges = [tuple(sorted((found[k], found[k + 1]))) for k in range(n - 1)]
            return tree_from_edges(n, edges, graph.weight_map())
    raise TopologyError("graph contains no Hamiltonian path")


def random_connected_graph(
    n: int, rng: np.random.Generator, edge_prob: float = 0.5, quality_scale: float = 10.0
) -> InterPlaneGraph:
    """Random connected graph with diameter-dominant weights from random qualities."""
    while True:
        qualities = {}
        for i, j in itertools.combinations(range(n), 2):
            if rng.random() < edge_prob:
                qualities[(i, j)] = float(rng.uniform(0.1, quality_scale))
        if len(qualities) < n - 1:
            continue
        g = InterPlaneGraph.from_qualities(n, qualities)
        if g.is_connected():
            return g
