"""Optimality baselines.

* :func:`minimum_cover` / :func:`omniscient_run`: the best schedule for a
  *known* realization, cost ``|P*| + |Q*_n|``.
* :func:`mdp_optimal`: the exact optimal adaptive policy by memoized
  expectimax over (verified, invalidated) states.
* :func:`exact_expected_cost`: brute-force expectation of any algorithm over
  all realizations, plus a decision-tree variant that only visits the answer
  sequences an algorithm can actually produce.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path as FsPath
from typing import Callable, Iterable, Sequence

from .multigraph import (
    DEFAULT_PATH_CAP,
    Multigraph,
    Path,
    bfs_distance,
    build_graph,
    enumerate_paths_shorter_than,
)
from .oracle import DeterministicOracle, Oracle, OracleTrace, Subgraph, edge_probabilities
from .search import RunResult, _shortest_within

__all__ = [
    "CoverError",
    "CapExceededError",
    "CoverProblem",
    "minimum_cover",
    "exhaustive_cover",
    "omniscient_run",
    "MDPSolution",
    "mdp_optimal",
    "mdp_policy_run",
    "exact_expected_cost",
    "decision_tree_expected_cost",
    "save_policy",
]

Algorithm = Callable[[Multigraph, Oracle], RunResult]


class CoverError(ValueError):
    """Some path cannot be hit by the allowed edges."""


class CapExceededError(RuntimeError):
    pass


@dataclass
class CoverProblem:
    short_paths: list[Path]
    absent_edges: frozenset[int]
    p_star: Path | None = None

    def __post_init__(self):
        self.absent_edges = frozenset(self.absent_edges)
        if self.p_star is not None:
            for p in self.short_paths:
                if len(p) >= len(self.p_star):
                    raise ValueError("short paths must be strictly shorter than p_star")


def _masks(problem: CoverProblem) -> list[int]:
    absent = problem.absent_edges
    out = []
    for p in problem.short_paths:
        mask = 0
        for e in p.edges:
            if e in absent:
                mask |= 1 << e
        if not mask:
            raise CoverError(f"path {p.edges} has no absent edge")
        out.append(mask)
    return out


def _minimal_sets(masks: Iterable[int]) -> list[int]:
    """Drop duplicates and supersets: hitting a subset already hits its supersets."""
    uniq = sorted(set(masks), key=lambda m: (m.bit_count(), m))
    kept: list[int] = []
    for m in uniq:
        if not any(k & m == k for k in kept):
            kept.append(m)
    return kept


def _packing_bound(sets: list[int]) -> int:
    """Greedy count of pairwise-disjoint sets; each needs its own cover element."""
    used, count = 0, 0
    for m in sorted(sets, key=lambda x: x.bit_count()):
        if not m & used:
            used |= m
            count += 1
    return count


def _min_size(sets: list[int], allowed: int, limit: int) -> int:
    """Minimum hitting-set size using ``allowed`` elements, or ``limit + 1`` if above ``limit``."""
    if not sets:
        return 0
    if limit <= 0:
        return limit + 1
    for m in sets:
        if not m & allowed:
            return limit + 1
    if _packing_bound([m & allowed for m in sets]) > limit:
        return limit + 1
    pivot = min(sets, key=lambda m: ((m & allowed).bit_count(), m))
    cand = pivot & allowed
    elems = []
    while cand:
        low = cand & -cand
        elems.append(low)
        cand ^= low
    # most frequent elements first tightens the bound sooner
    elems.sort(key=lambda b: -sum(1 for m in sets if m & b))
    best = limit + 1
    for b in elems:
        rest = [m for m in sets if not m & b]
        r = _min_size(rest, allowed, best - 2)
        if 1 + r < best:
            best = 1 + r
            if best <= 1:
                break
    return best


def _greedy_size(sets: list[int], allowed: int) -> int:
    remaining, size = list(sets), 0
    while remaining:
        counts: dict[int, int] = {}
        for m in remaining:
            c = m & allowed
            while c:
                low = c & -c
                counts[low] = counts.get(low, 0) + 1
                c ^= low
        b = max(counts, key=lambda x: (counts[x], -x))
        remaining = [m for m in remaining if not m & b]
        size += 1
    return size


def minimum_cover(problem: CoverProblem, cap: int = 10**5) -> frozenset[int]:
    """Smallest set of absent edges hitting every short path; lexicographically
    smallest (as a sorted id tuple) among all minimum covers.

    Branch and bound with a greedy upper bound and a disjoint-set packing
    lower bound; the lexicographic choice fixes elements one at a time,
    smallest first, keeping only choices that still admit a cover of the
    optimal size.
    """
    if len(problem.short_paths) > cap:
        raise CapExceededError(f"{len(problem.short_paths)} paths exceed the cover cap {cap}")
    sets = _minimal_sets(_masks(problem))
    if not sets:
        return frozenset()
    universe = 0
    for m in sets:
        universe |= m
    k = _min_size(sets, universe, _greedy_size(sets, universe))
    chosen: list[int] = []
    remaining = sets
    lowest = 0
    for slot in range(k):
        for e in range(lowest, universe.bit_length()):
            b = 1 << e
            if not universe & b or not any(m & b for m in remaining):
                continue
            rest = [m for m in remaining if not m & b]
            allowed = universe & ~((1 << (e + 1)) - 1)
            need = k - slot - 1
            if _min_size(rest, allowed, need) <= need:
                chosen.append(e)
                remaining = rest
                lowest = e + 1
                break
        else:  # pragma: no cover - k is attainable by construction
            raise AssertionError("lexicographic cover reconstruction failed")
    assert not remaining
    return frozenset(chosen)


def exhaustive_cover(problem: CoverProblem) -> frozenset[int]:
    """Reference: subsets of absent edges by size, then lexicographically; first hitting set wins."""
    sets = _masks(problem)
    pool = sorted(problem.absent_edges)
    for k in range(len(pool) + 1):
        for combo in itertools.combinations(pool, k):
            mask = 0
            for e in combo:
                mask |= 1 << e
            if all(m & mask for m in sets):
                return frozenset(combo)
    raise CoverError("no cover exists")  # pragma: no cover - guarded by _masks


def omniscient_run(
    g: Multigraph,
    sub: Subgraph,
    oracle: Oracle | None = None,
    path_cap: int = DEFAULT_PATH_CAP,
) -> RunResult:
    """Query one cover edge per still-alive short path (shortest first), then all of P*.

    Cost is exactly ``|P*| + |Q*_n|``; every cover edge is checked to have
    been used.
    """
    if oracle is None:
        oracle = DeterministicOracle(sub)
    present = sub.edge_set
    p_star = _shortest_within(g, present)
    bound = float("inf") if p_star is None else len(p_star)
    short = enumerate_paths_shorter_than(g, bound, cap=path_cap)
    cover = minimum_cover(CoverProblem(short, sub.absent, p_star))
    start = len(oracle.trace.queried)
    dead: set[int] = set()
    for path in short:
        if dead.intersection(path.edges):
            continue
        e = min(cover.intersection(path.edges))
        if oracle.query(e):
            raise AssertionError(f"cover edge {e} reported present")
        dead.add(e)
    if dead != cover:
        raise AssertionError(f"cover edges never queried: {sorted(cover - dead)}")
    if p_star is not None:
        for e in p_star.edges:
            if not oracle.query(e):
                raise AssertionError(f"edge {e} of P* reported absent")
    trace = OracleTrace(oracle.trace.queried[start:])
    return RunResult(g, p_star, trace, info={"cover": sorted(cover), "short_paths": len(short)})


# ---------------------------------------------------------------------------
# exact optimal policy


def _bundle_structure(g: Multigraph, probs: Sequence[float]):
    """Bundles of parallel edges, exchangeable classes (same bundle and probability),
    and all simple s-t paths of the bundle graph as (bundle mask, length)."""
    bundle_of: dict[tuple[int, int], int] = {}
    bundles: list[tuple[int, int]] = []
    edge_bundle = []
    for u, v in g.edges:
        key = (min(u, v), max(u, v))
        if key not in bundle_of:
            bundle_of[key] = len(bundles)
            bundles.append(key)
        edge_bundle.append(bundle_of[key])
    class_of: dict[tuple[int, float], int] = {}
    classes: list[list[int]] = []
    class_bundle, class_p = [], []
    for e in range(g.m):
        key = (edge_bundle[e], probs[e])
        if key not in class_of:
            class_of[key] = len(classes)
            classes.append([])
            class_bundle.append(edge_bundle[e])
            class_p.append(probs[e])
        classes[class_of[key]].append(e)
    simple = build_graph(g.n, bundles, g.s, g.t)
    paths = [(sum(1 << b for b in p.edges), len(p)) for p in enumerate_paths_shorter_than(simple)]
    return edge_bundle, classes, class_bundle, class_p, paths


@dataclass
class MDPSolution:
    """Optimal expected query count and the policy that achieves it.

    ``action(q_yes_mask, q_no_mask)`` gives the optimal edge for any state
    reachable from the root (``None`` once the state certifies an answer).
    """

    graph: Multigraph
    probs: tuple[float, ...]
    expected_cost: float
    pruned: bool
    states_evaluated: int
    _solver: object = field(repr=False, default=None)

    def action(self, q_yes: int, q_no: int) -> int | None:
        return self._solver.action(q_yes, q_no)

    def policy_map(self, limit: int = 10**6) -> dict[tuple[int, int], int]:
        """Every non-terminal state the optimal policy can reach, mapped to its action."""
        out: dict[tuple[int, int], int] = {}
        stack = [(0, 0)]
        while stack:
            y, n = stack.pop()
            if (y, n) in out:
                continue
            a = self.action(y, n)
            if a is None:
                continue
            out[(y, n)] = a
            if len(out) > limit:
                raise CapExceededError(f"policy has more than {limit} reachable states")
            stack.append((y | 1 << a, n))
            stack.append((y, n | 1 << a))
        return out

    @cached_property
    def policy(self) -> dict[tuple[int, int], int]:
        return self.policy_map()

    def to_json(self) -> str:
        pol = {f"{y:#x}:{n:#x}": a for (y, n), a in sorted(self.policy.items())}
        return json.dumps({"root_expected_cost": self.expected_cost, "policy": pol}, sort_keys=True, indent=1) + "\n"


class _ClassSolver:
    """Expectimax over per-class counts; parallel edges with equal probability are exchangeable.

    Class entry: -1 if its bundle holds a verified edge, otherwise the number
    of its edges found absent.  Memo keys blank out (-2) every class whose
    bundle lies on no surviving path strictly shorter than the best verified
    path; such edges can never change whether a state certifies.
    """

    def __init__(self, g: Multigraph, probs: Sequence[float]):
        self.g = g
        (self.edge_bundle, self.classes, self.class_bundle,
         self.class_p, self.paths) = _bundle_structure(g, probs)
        self.class_size = [len(c) for c in self.classes]
        self.bundle_classes: dict[int, list[int]] = {}
        for c, b in enumerate(self.class_bundle):
            self.bundle_classes.setdefault(b, []).append(c)
        self.class_of_edge = [0] * g.m
        for c, edges in enumerate(self.classes):
            for e in edges:
                self.class_of_edge[e] = c
        self.memo: dict[tuple, tuple[float, int]] = {}
        self.raw: dict[tuple, tuple[float, int]] = {}

    def _relevant(self, ver: int, dead: int) -> int:
        """Union of bundles on surviving paths shorter than the best verified one (0: terminal)."""
        best_verified = float("inf")
        for m, L in self.paths:  # sorted by length
            if not m & dead and m & ver == m:
                best_verified = L
                break
        R = 0
        for m, L in self.paths:
            if L >= best_verified:
                break
            if not m & dead:
                R |= m
        return R

    def _masks(self, state: tuple) -> tuple[int, int]:
        ver = dead = 0
        for b, cls in self.bundle_classes.items():
            if state[cls[0]] == -1:
                ver |= 1 << b
            elif all(state[c] == self.class_size[c] for c in cls):
                dead |= 1 << b
        return ver, dead

    def value(self, state: tuple, ver: int | None = None, dead: int = 0) -> tuple[float, int]:
        hit = self.raw.get(state)
        if hit is not None:
            return hit
        if ver is None:
            ver, dead = self._masks(state)
        out = self.raw[state] = self._value(state, ver, dead)
        return out

    def _value(self, state: tuple, ver: int, dead: int) -> tuple[float, int]:
        R = self._relevant(ver, dead)
        if not R:
            return 0.0, -1
        cb = self.class_bundle
        key = tuple(x if R >> cb[c] & 1 else -2 for c, x in enumerate(state))
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        best, best_c = float("inf"), -1
        for c, x in enumerate(state):
            b = cb[c]
            if not R >> b & 1 or ver >> b & 1 or x >= self.class_size[c]:
                continue
            p = self.class_p[c]
            yes = list(state)
            for c2 in self.bundle_classes[b]:
                yes[c2] = -1
            no = list(state)
            no[c] = x + 1
            no_dead = dead
            if all(no[c2] == self.class_size[c2] for c2 in self.bundle_classes[b]):
                no_dead |= 1 << b
            v = (1.0 + p * self.value(tuple(yes), ver | 1 << b, dead)[0]
                 + (1.0 - p) * self.value(tuple(no), ver, no_dead)[0])
            if v < best - 1e-12:
                best, best_c = v, c
        self.memo[key] = (best, best_c)
        return best, best_c

    def concrete(self, q_yes: int, q_no: int) -> tuple:
        state = [0] * len(self.classes)
        verified_bundles = {self.edge_bundle[e] for e in range(self.g.m) if q_yes >> e & 1}
        for c, edges in enumerate(self.classes):
            if self.class_bundle[c] in verified_bundles:
                state[c] = -1
            else:
                state[c] = sum(1 for e in edges if q_no >> e & 1)
        return tuple(state)

    def action(self, q_yes: int, q_no: int) -> int | None:
        _, c = self.value(self.concrete(q_yes, q_no))
        if c < 0:
            return None
        queried = q_yes | q_no
        return min(e for e in self.classes[c] if not queried >> e & 1)


class _EdgeSolver:
    """Expectimax over raw (q_yes, q_no) bitmasks with every unqueried edge allowed."""

    def __init__(self, g: Multigraph, probs: Sequence[float]):
        self.g = g
        self.probs = probs
        self.paths = [(sum(1 << e for e in p.edges), len(p)) for p in enumerate_paths_shorter_than(g)]
        self.full = (1 << g.m) - 1
        self.memo: dict[tuple[int, int], tuple[float, int]] = {}

    def terminal(self, y: int, n: int) -> bool:
        surviving = [(m, L) for m, L in self.paths if not m & n]
        if not surviving:
            return True
        shortest = min(L for _, L in surviving)
        return any(m & y == m and L <= shortest for m, L in surviving)

    def value(self, y: int, n: int) -> tuple[float, int]:
        hit = self.memo.get((y, n))
        if hit is not None:
            return hit
        if self.terminal(y, n):
            out = (0.0, -1)
        else:
            best, best_e = float("inf"), -1
            free = self.full & ~(y | n)
            for e in range(self.g.m):
                if not free >> e & 1:
                    continue
                p = self.probs[e]
                v = 1.0 + p * self.value(y | 1 << e, n)[0] + (1.0 - p) * self.value(y, n | 1 << e)[0]
                if v < best - 1e-12:
                    best, best_e = v, e
            out = (best, best_e)
        self.memo[(y, n)] = out
        return out

    def action(self, q_yes: int, q_no: int) -> int | None:
        _, e = self.value(q_yes, q_no)
        return None if e < 0 else e


def mdp_optimal(g: Multigraph, edge_probs, prune: bool = True, cap: int = 18) -> MDPSolution:
    """Exact minimum expected number of queries over all correct adaptive policies.

    With ``prune`` the search restricts actions to edges that can still
    matter and merges exchangeable parallel edges; ``prune=False`` searches
    raw bitmask states over every unqueried edge (for auditing small graphs).
    """
    if g.m > cap:
        raise CapExceededError(f"{g.m} edges exceed the MDP cap {cap}")
    probs = edge_probabilities(g, edge_probs)
    if prune:
        solver = _ClassSolver(g, probs)
        root = solver.value(tuple([0] * len(solver.classes)))[0]
    else:
        solver = _EdgeSolver(g, probs)
        root = solver.value(0, 0)[0]
    return MDPSolution(g, probs, root, prune, len(solver.memo), solver)


def mdp_policy_run(solution: MDPSolution, oracle: Oracle) -> RunResult:
    """Follow the optimal policy against ``oracle`` until the state certifies an answer."""
    g = solution.graph
    start = len(oracle.trace.queried)
    y = n = 0
    while True:
        e = solution.action(y, n)
        if e is None:
            break
        if oracle.query(e):
            y |= 1 << e
        else:
            n |= 1 << e
    trace = OracleTrace(oracle.trace.queried[start:])
    if bfs_distance(g, [e for e in range(g.m) if not n >> e & 1]) is None:
        return RunResult(g, None, trace)
    # at a terminal state the best verified path is no longer than any survivor
    path = _shortest_within(g, [e for e in range(g.m) if y >> e & 1])
    return RunResult(g, path, trace)


# ---------------------------------------------------------------------------
# expected cost of a given algorithm


def exact_expected_cost(g: Multigraph, edge_probs, algorithm: Algorithm, cap: int = 20) -> float:
    """Sum over all 2^|E| realizations of Pr[G'] * cost(algorithm on G')."""
    if g.m > cap:
        raise CapExceededError(f"{g.m} edges exceed the enumeration cap {cap}")
    probs = edge_probabilities(g, edge_probs)
    total = 0.0
    for mask in range(1 << g.m):
        pr = 1.0
        for e in range(g.m):
            pr *= probs[e] if mask >> e & 1 else 1.0 - probs[e]
        sub = Subgraph.from_mask(g, mask)
        total += pr * algorithm(g, DeterministicOracle(sub)).cost
    return total


class _Unscripted(Exception):
    def __init__(self, edge: int):
        super().__init__(edge)
        self.edge = edge


class _ScriptOracle(Oracle):
    def __init__(self, g: Multigraph, script: dict[int, bool]):
        super().__init__(g.m)
        self.script = script

    def _answer(self, edge: int) -> bool:
        try:
            return self.script[edge]
        except KeyError:
            raise _Unscripted(edge) from None


def decision_tree_expected_cost(g: Multigraph, edge_probs, algorithm: Algorithm) -> float:
    """Expected cost by walking the algorithm's decision tree.

    The algorithm is re-run with a growing script of per-edge answers; an
    unscripted query branches on both answers.  Valid for algorithms whose
    queries depend only on earlier answers, i.e. anything not peeking at G'.
    """
    probs = edge_probabilities(g, edge_probs)
    total = 0.0
    stack: list[tuple[dict[int, bool], float]] = [({}, 1.0)]
    while stack:
        script, pr = stack.pop()
        try:
            cost = algorithm(g, _ScriptOracle(g, script)).cost
        except _Unscripted as branch:
            e = branch.edge
            stack.append(({**script, e: False}, pr * (1.0 - probs[e])))
            stack.append(({**script, e: True}, pr * probs[e]))
            continue
        total += pr * cost
    return total


def save_policy(solution: MDPSolution, path: str | FsPath) -> None:
    try:
        FsPath(path).write_text(solution.to_json())
    except OSError as exc:
        raise OSError(f"cannot write policy to {path}: {exc}") from exc
