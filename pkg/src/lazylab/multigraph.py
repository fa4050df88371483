"""Undirected unit-length multigraphs, s-t paths and the query state of a search.

Edges are identified by their position in the edge list.  Paths are compared
under a fixed total preorder:

1. length (number of edges), ascending;
2. number of edges not yet verified, ascending;
3. the edge-id sequence read from ``s``, lexicographically ascending.

:func:`shortest_candidate_path` returns the minimum of that order over all
simple s-t paths that avoid the invalidated edges.
"""

from __future__ import annotations

import heapq
import json
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path as FsPath
from typing import Iterable, Iterator, Sequence

__all__ = [
    "GraphError",
    "PathCountError",
    "Multigraph",
    "Path",
    "UnionFind",
    "QueryState",
    "build_graph",
    "shortest_candidate_path",
    "enumerate_paths_shorter_than",
    "components_after",
    "bfs_distance",
    "graph_to_json",
    "graph_from_json",
    "save_graph",
    "load_graph",
]

DEFAULT_PATH_CAP = 10**6


class GraphError(ValueError):
    """Invalid graph construction or an edge id outside the graph."""


class PathCountError(RuntimeError):
    """Path enumeration exceeded its configured cap."""


@dataclass(frozen=True)
class Multigraph:
    n: int
    edges: tuple[tuple[int, int], ...]
    s: int
    t: int

    def __post_init__(self):
        if self.n < 1:
            raise GraphError(f"vertex count must be positive, got {self.n}")
        for v in (self.s, self.t):
            if not 0 <= v < self.n:
                raise GraphError(f"terminal {v} out of range for n={self.n}")
        if self.s == self.t:
            raise GraphError("source and target must differ")
        for eid, (u, v) in enumerate(self.edges):
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise GraphError(f"edge {eid}=({u}, {v}) has an endpoint out of range")
            if u == v:
                raise GraphError(f"edge {eid} is a self-loop at vertex {u}")

    @property
    def m(self) -> int:
        return len(self.edges)

    @cached_property
    def incidence(self) -> tuple[tuple[tuple[int, int], ...], ...]:
        """Per vertex, the ``(edge_id, other_endpoint)`` pairs sorted by edge id."""
        inc: list[list[tuple[int, int]]] = [[] for _ in range(self.n)]
        for eid, (u, v) in enumerate(self.edges):
            inc[u].append((eid, v))
            inc[v].append((eid, u))
        return tuple(tuple(row) for row in inc)

    def other(self, edge: int, v: int) -> int:
        a, b = self.edges[edge]
        if v == a:
            return b
        if v == b:
            return a
        raise GraphError(f"vertex {v} is not an endpoint of edge {edge}")

    def check_edge(self, edge: int) -> None:
        if not 0 <= edge < len(self.edges):
            raise GraphError(f"edge id {edge} out of range [0, {len(self.edges)})")


def build_graph(vertex_count: int, edge_list: Iterable[Sequence[int]], s: int, t: int) -> Multigraph:
    """Build a multigraph; edge ids follow the order of ``edge_list``."""
    edges = tuple((int(u), int(v)) for u, v in edge_list)
    return Multigraph(int(vertex_count), edges, int(s), int(t))


@dataclass(frozen=True)
class Path:
    edges: tuple[int, ...]
    vertices: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.edges)

    @classmethod
    def from_edges(cls, g: Multigraph, edges: Sequence[int], start: int | None = None) -> "Path":
        v = g.s if start is None else start
        verts = [v]
        for e in edges:
            g.check_edge(e)
            v = g.other(e, v)
            verts.append(v)
        return cls(tuple(edges), tuple(verts))

    def is_valid(self, g: Multigraph) -> bool:
        """Simple s-t path whose consecutive vertices are joined by the listed edges."""
        if len(self.vertices) != len(self.edges) + 1 or not self.edges:
            return False
        if self.vertices[0] != g.s or self.vertices[-1] != g.t:
            return False
        if len(set(self.vertices)) != len(self.vertices):
            return False
        for i, e in enumerate(self.edges):
            if not 0 <= e < g.m:
                return False
            if {self.vertices[i], self.vertices[i + 1]} != set(g.edges[e]):
                return False
        return True


class UnionFind:
    """Disjoint sets over ``0..n-1`` with path halving and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n
        self.count = n

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.count -= 1
        return True

    def copy(self) -> "UnionFind":
        other = UnionFind.__new__(UnionFind)
        other.parent = list(self.parent)
        other.size = list(self.size)
        other.count = self.count
        return other

    def partition(self) -> frozenset[frozenset[int]]:
        blocks: dict[int, set[int]] = {}
        for x in range(len(self.parent)):
            blocks.setdefault(self.find(x), set()).add(x)
        return frozenset(frozenset(b) for b in blocks.values())


@dataclass
class QueryState:
    """Verified (``q_yes``) and invalidated (``q_no``) edges plus the components of (V, q_yes)."""

    graph: Multigraph
    q_yes: set[int] = field(default_factory=set)
    q_no: set[int] = field(default_factory=set)
    components: UnionFind = field(init=False)

    def __post_init__(self):
        self.q_yes = set(self.q_yes)
        self.q_no = set(self.q_no)
        for e in self.q_yes | self.q_no:
            self.graph.check_edge(e)
        if self.q_yes & self.q_no:
            raise ValueError(f"edges both verified and invalidated: {sorted(self.q_yes & self.q_no)}")
        self.components = UnionFind(self.graph.n)
        for e in sorted(self.q_yes):
            self.components.union(*self.graph.edges[e])

    def is_queried(self, edge: int) -> bool:
        return edge in self.q_yes or edge in self.q_no

    def record(self, edge: int, answer: bool) -> None:
        self.graph.check_edge(edge)
        if self.is_queried(edge):
            raise ValueError(f"edge {edge} already queried")
        if answer:
            self.q_yes.add(edge)
            self.components.union(*self.graph.edges[edge])
        else:
            self.q_no.add(edge)

    def copy(self) -> "QueryState":
        other = QueryState.__new__(QueryState)
        other.graph = self.graph
        other.q_yes = set(self.q_yes)
        other.q_no = set(self.q_no)
        other.components = self.components.copy()
        return other

    @property
    def n_components(self) -> int:
        return self.components.count

    def partition(self) -> frozenset[frozenset[int]]:
        return self.components.partition()

    def consistent(self) -> bool:
        """Incremental components agree with a from-scratch recomputation."""
        return self.partition() == QueryState(self.graph, self.q_yes, self.q_no).partition()


def components_after(state: QueryState, edge: int) -> UnionFind:
    """Components of (V, q_yes + edge), leaving ``state`` untouched."""
    state.graph.check_edge(edge)
    uf = state.components.copy()
    uf.union(*state.graph.edges[edge])
    return uf


def bfs_distance(g: Multigraph, allowed: Iterable[int] | None = None) -> int | None:
    """Hop distance from s to t using only ``allowed`` edges (all edges if None)."""
    ok = None if allowed is None else set(allowed)
    dist = [-1] * g.n
    dist[g.s] = 0
    queue = deque([g.s])
    while queue:
        u = queue.popleft()
        for e, w in g.incidence[u]:
            if dist[w] < 0 and (ok is None or e in ok):
                dist[w] = dist[u] + 1
                if w == g.t:
                    return dist[w]
                queue.append(w)
    return None


def shortest_candidate_path(g: Multigraph, state: QueryState) -> Path | None:
    """Minimum simple s-t path in (V, E \\ q_no) under the (length, unverified, edge ids) order.

    Label-setting search from t with edge weight ``n + [edge unverified]``:
    since any simple path has fewer than n edges, the packed integer orders
    paths by length first and unverified count second.  The walk from s then
    takes, at every vertex, the smallest-id edge that stays on an optimal
    route, which yields the lexicographically smallest optimal edge sequence.
    """
    big = g.n
    q_yes, q_no = state.q_yes, state.q_no
    inf = float("inf")
    dist: list[float] = [inf] * g.n
    dist[g.t] = 0
    done = [False] * g.n
    heap = [(0, g.t)]
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        if u == g.s:
            break
        for e, w in g.incidence[u]:
            if e in q_no or done[w]:
                continue
            nd = d + big + (0 if e in q_yes else 1)
            if nd < dist[w]:
                dist[w] = nd
                heapq.heappush(heap, (nd, w))
    if not done[g.s]:
        return None
    edges, verts = [], [g.s]
    u = g.s
    while u != g.t:
        for e, w in g.incidence[u]:  # sorted by edge id
            if e in q_no:
                continue
            if dist[w] + big + (0 if e in q_yes else 1) == dist[u]:
                edges.append(e)
                verts.append(w)
                u = w
                break
        else:  # pragma: no cover - the distances guarantee a tight edge
            raise AssertionError("no tight edge on the optimal walk")
    return Path(tuple(edges), tuple(verts))


def _paths_dfs(g: Multigraph, bound: float, excluded: set[int], cap: int) -> Iterator[tuple[int, ...]]:
    # hop distance to t prunes branches that cannot finish under the bound
    to_t = [-1] * g.n
    to_t[g.t] = 0
    queue = deque([g.t])
    while queue:
        u = queue.popleft()
        for e, w in g.incidence[u]:
            if to_t[w] < 0 and e not in excluded:
                to_t[w] = to_t[u] + 1
                queue.append(w)
    if to_t[g.s] < 0:
        return
    on_path = [False] * g.n
    on_path[g.s] = True
    stack_edges: list[int] = []
    count = 0

    def rec(u: int) -> Iterator[tuple[int, ...]]:
        nonlocal count
        if u == g.t:
            count += 1
            if count > cap:
                raise PathCountError(f"more than {cap} s-t paths below bound {bound}")
            yield tuple(stack_edges)
            return
        depth = len(stack_edges)
        for e, w in g.incidence[u]:
            if e in excluded or on_path[w] or to_t[w] < 0:
                continue
            if depth + 1 + to_t[w] >= bound:
                continue
            on_path[w] = True
            stack_edges.append(e)
            yield from rec(w)
            stack_edges.pop()
            on_path[w] = False

    yield from rec(g.s)


def enumerate_paths_shorter_than(
    g: Multigraph,
    bound: float = float("inf"),
    cap: int = DEFAULT_PATH_CAP,
    excluded: Iterable[int] = (),
) -> list[Path]:
    """All simple s-t paths with fewer than ``bound`` edges, in (length, edge ids) order."""
    seqs = list(_paths_dfs(g, bound, set(excluded), cap))
    seqs.sort(key=lambda seq: (len(seq), seq))
    return [Path.from_edges(g, seq) for seq in seqs]


def graph_to_json(g: Multigraph, annotations: dict | None = None) -> str:
    obj: dict = {"n": g.n, "s": g.s, "t": g.t, "edges": [[u, v] for u, v in g.edges]}
    if annotations is not None:
        obj["annotations"] = annotations
    return json.dumps(obj, separators=(",", ":"), sort_keys=True) + "\n"


def graph_from_json(text: str) -> tuple[Multigraph, dict | None]:
    obj = json.loads(text)
    try:
        g = build_graph(obj["n"], obj["edges"], obj["s"], obj["t"])
    except KeyError as exc:
        raise GraphError(f"graph JSON missing field {exc}") from None
    return g, obj.get("annotations")


def save_graph(g: Multigraph, path: str | FsPath, annotations: dict | None = None) -> None:
    try:
        FsPath(path).write_text(graph_to_json(g, annotations))
    except OSError as exc:
        raise OSError(f"cannot write graph to {path}: {exc}") from exc


def load_graph(path: str | FsPath) -> Multigraph:
    return load_graph_annotated(path)[0]


def load_graph_annotated(path: str | FsPath) -> tuple[Multigraph, dict | None]:
    try:
        text = FsPath(path).read_text()
    except OSError as exc:
        raise OSError(f"cannot read graph from {path}: {exc}") from exc
    return graph_from_json(text)
