"""Pure-Python LazySP kernel; mirrors ``_ckernel.pyx`` line for line.

Parallel edges are grouped into bundles.  A bundle's representative is its
smallest verified edge if it has one, otherwise its smallest unqueried edge;
only representatives can lie on the minimum candidate path, so the shortest
path search runs over bundles instead of raw edges.

A Yes answer on a candidate-path edge never changes the candidate path (its
cost drops by one unverified edge, and no other path gains relative to it),
so the path is recomputed only after a No answer.
"""

from __future__ import annotations

import heapq

UNKNOWN, YES, NO = 0, 1, 2
FORWARD, BACKWARD, BISECTION = 0, 1, 2


def select_on_path(path_edges, status, code: int) -> int:
    """Index into ``path_edges`` of the edge the built-in selector ``code`` picks."""
    L = len(path_edges)
    if code == FORWARD:
        for i in range(L):
            if status[path_edges[i]] == UNKNOWN:
                return i
    elif code == BACKWARD:
        for i in range(L - 1, -1, -1):
            if status[path_edges[i]] == UNKNOWN:
                return i
    elif code == BISECTION:
        far = L + 1
        left = [far] * L
        last = -1
        for i in range(L):
            if status[path_edges[i]] != UNKNOWN:
                last = i
            left[i] = i - last if last >= 0 else far
        if last < 0:
            return (L - 1) // 2
        best, best_d, nxt = -1, -1, -1
        for i in range(L - 1, -1, -1):
            if status[path_edges[i]] != UNKNOWN:
                nxt = i
                continue
            d = left[i]
            if nxt >= 0 and nxt - i < d:
                d = nxt - i
            if d >= best_d:  # scanning from t, ">=" keeps the index nearest s
                best, best_d = i, d
        return best
    else:
        raise ValueError(f"unknown selector code {code}")
    raise ValueError("every edge on the path is already queried")


class Kernel:
    def __init__(self, n: int, s: int, t: int, eu, ev):
        self.n, self.s, self.t = n, s, t
        self.m = len(eu)
        index: dict[tuple[int, int], int] = {}
        self.bundle_edges: list[list[int]] = []
        self.bundle_u: list[int] = []
        self.bundle_v: list[int] = []
        self.edge_bundle = [0] * self.m
        for e in range(self.m):
            u, v = eu[e], ev[e]
            key = (u, v) if u < v else (v, u)
            b = index.get(key)
            if b is None:
                b = index[key] = len(self.bundle_edges)
                self.bundle_edges.append([])
                self.bundle_u.append(key[0])
                self.bundle_v.append(key[1])
            self.bundle_edges[b].append(e)
            self.edge_bundle[e] = b
        self.adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
        for b, (u, v) in enumerate(zip(self.bundle_u, self.bundle_v)):
            self.adj[u].append((b, v))
            self.adj[v].append((b, u))

    def _shortest(self, yes_min, unk_ptr):
        n, s, t = self.n, self.s, self.t
        bundle_edges = self.bundle_edges
        big = n
        inf = 1 << 62
        dist = [inf] * n
        done = [False] * n
        dist[t] = 0
        heap = [(0, t)]
        while heap:
            d, u = heapq.heappop(heap)
            if done[u]:
                continue
            done[u] = True
            if u == s:
                break
            for b, w in self.adj[u]:
                if done[w]:
                    continue
                if yes_min[b] >= 0:
                    nd = d + big
                elif unk_ptr[b] < len(bundle_edges[b]):
                    nd = d + big + 1
                else:
                    continue
                if nd < dist[w]:
                    dist[w] = nd
                    heapq.heappush(heap, (nd, w))
        if not done[s]:
            return None
        edges, verts = [], [s]
        u = s
        while u != t:
            best_e, best_w = -1, -1
            for b, w in self.adj[u]:
                if yes_min[b] >= 0:
                    rep, c = yes_min[b], big
                elif unk_ptr[b] < len(bundle_edges[b]):
                    rep, c = bundle_edges[b][unk_ptr[b]], big + 1
                else:
                    continue
                if dist[w] + c == dist[u] and (best_e < 0 or rep < best_e):
                    best_e, best_w = rep, w
            edges.append(best_e)
            verts.append(best_w)
            u = best_w
        return edges, verts

    def run(self, query, code: int, preset=None, record: bool = False):
        """Run LazySP; returns ``(path_edges, path_vertices, candidates, step_candidate)``.

        ``preset`` maps already-known edges to answers; ``candidates`` and
        ``step_candidate`` are filled only when ``record`` is true.
        """
        status = [UNKNOWN] * self.m
        yes_min = [-1] * len(self.bundle_edges)
        unk_ptr = [0] * len(self.bundle_edges)
        if preset:
            for e, a in preset.items():
                status[e] = YES if a else NO
                b = self.edge_bundle[e]
                if a and (yes_min[b] < 0 or e < yes_min[b]):
                    yes_min[b] = e
        bundle_edges = self.bundle_edges
        for b in range(len(bundle_edges)):
            row = bundle_edges[b]
            k = 0
            while k < len(row) and status[row[k]] != UNKNOWN:
                k += 1
            unk_ptr[b] = k
        candidates = [] if record else None
        step_candidate = [] if record else None

        found = self._shortest(yes_min, unk_ptr)
        if found is not None and record:
            candidates.append(tuple(found[0]))
        unverified = 0 if found is None else sum(1 for e in found[0] if status[e] == UNKNOWN)
        while found is not None and unverified:
            path_edges = found[0]
            e = path_edges[select_on_path(path_edges, status, code)]
            if record:
                step_candidate.append(len(candidates) - 1)
            b = self.edge_bundle[e]
            if query(e):
                status[e] = YES
                if yes_min[b] < 0 or e < yes_min[b]:
                    yes_min[b] = e
                unverified -= 1
            else:
                status[e] = NO
                row = bundle_edges[b]
                k = unk_ptr[b]
                while k < len(row) and status[row[k]] != UNKNOWN:
                    k += 1
                unk_ptr[b] = k
                found = self._shortest(yes_min, unk_ptr)
                if found is not None:
                    if record:
                        candidates.append(tuple(found[0]))
                    unverified = sum(1 for e2 in found[0] if status[e2] == UNKNOWN)
        if found is None:
            return None, None, candidates, step_candidate
        return tuple(found[0]), tuple(found[1]), candidates, step_candidate
