"""LazySP with pluggable edge selectors, termination certification, and the
two-phase baseline used against the adversarial gadget."""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path as FsPath
from typing import Callable, Iterable, Sequence

from . import _backend, _pyengine
from .multigraph import Multigraph, Path, QueryState, UnionFind, shortest_candidate_path
from .oracle import Oracle, OracleTrace, Subgraph

__all__ = [
    "SelectorError",
    "forward_selector",
    "backward_selector",
    "bisection_selector",
    "SELECTORS",
    "RunResult",
    "lazysp",
    "lazysp_reference",
    "is_connective_step",
    "connectivity_audit",
    "verify_termination",
    "alg_theorem2",
    "write_run_trace_csv",
    "kernel_for",
]

EdgeSelector = Callable[[Path, "set[int] | frozenset[int]", "set[int] | frozenset[int]"], int]


class SelectorError(ValueError):
    pass


def _status_view(path: Path, q_yes, q_no) -> dict[int, int]:
    view = {}
    for e in path.edges:
        if e in q_yes:
            view[e] = _pyengine.YES
        elif e in q_no:
            view[e] = _pyengine.NO
        else:
            view[e] = _pyengine.UNKNOWN
    return view


def _builtin(code: int, path: Path, q_yes, q_no) -> int:
    try:
        return path.edges[_pyengine.select_on_path(path.edges, _status_view(path, q_yes, q_no), code)]
    except ValueError as exc:
        raise SelectorError(str(exc)) from None


def forward_selector(path: Path, q_yes, q_no) -> int:
    """First unqueried edge of the path, counting from s."""
    return _builtin(_pyengine.FORWARD, path, q_yes, q_no)


def backward_selector(path: Path, q_yes, q_no) -> int:
    """Last unqueried edge of the path (closest to t)."""
    return _builtin(_pyengine.BACKWARD, path, q_yes, q_no)


def bisection_selector(path: Path, q_yes, q_no) -> int:
    """Unqueried edge farthest, in path positions, from any queried edge of the path.

    Path ends are not obstacles; with nothing queried on the path the middle
    edge is taken.  Ties go to the edge nearest s.
    """
    return _builtin(_pyengine.BISECTION, path, q_yes, q_no)


forward_selector.code = _pyengine.FORWARD  # type: ignore[attr-defined]
backward_selector.code = _pyengine.BACKWARD  # type: ignore[attr-defined]
bisection_selector.code = _pyengine.BISECTION  # type: ignore[attr-defined]

SELECTORS: dict[str, EdgeSelector] = {
    "forward": forward_selector,
    "backward": backward_selector,
    "bisection": bisection_selector,
}


@dataclass
class RunResult:
    """Outcome of one run: a path (``None`` certifies that no s-t path exists) and the query trace.

    ``candidates`` and ``step_candidate`` are recorded on request: the distinct
    candidate paths in order, and for every query the index of the candidate
    it was taken from.
    """

    graph: Multigraph
    path: Path | None
    trace: OracleTrace
    initial: tuple[tuple[int, bool], ...] = ()
    candidates: list[Path] | None = None
    step_candidate: list[int] | None = None
    info: dict = field(default_factory=dict)

    @property
    def found(self) -> bool:
        return self.path is not None

    @property
    def cost(self) -> int:
        return self.trace.query_count

    @cached_property
    def final_state(self) -> QueryState:
        yes, no = set(), set()
        for e, a in list(self.initial) + self.trace.queried:
            (yes if a else no).add(e)
        return QueryState(self.graph, yes, no)


_KERNELS: dict[int, tuple[Multigraph, object]] = {}


def kernel_for(g: Multigraph, pure: bool = False):
    """Kernel prepared for ``g``; cached per graph object."""
    cls = _backend.PyKernel if pure else _backend.Kernel
    key = id(g) * 2 + (1 if cls is _backend.PyKernel else 0)
    hit = _KERNELS.get(key)
    if hit is not None and hit[0] is g:
        return hit[1]
    if len(_KERNELS) > 64:
        _KERNELS.clear()
    k = cls(g.n, g.s, g.t, [u for u, _ in g.edges], [v for _, v in g.edges])
    _KERNELS[key] = (g, k)
    return k


def lazysp(
    g: Multigraph,
    oracle: Oracle,
    selector: EdgeSelector | str = forward_selector,
    state: QueryState | None = None,
    record: bool = False,
    pure: bool = False,
) -> RunResult:
    """Run LazySP: query edges of the current minimum candidate path until it is fully
    verified, or until no candidate path survives.

    ``state`` pre-loads edges already queried (they are never queried again);
    the returned trace covers only the oracle's own queries.
    """
    if isinstance(selector, str):
        selector = SELECTORS[selector]
    initial = () if state is None else tuple(
        [(e, True) for e in sorted(state.q_yes)] + [(e, False) for e in sorted(state.q_no)]
    )
    code = getattr(selector, "code", None)
    if code is None:
        return lazysp_reference(g, oracle, selector, state, record)
    start = len(oracle.trace.queried)
    kern = kernel_for(g, pure)
    preset = dict(initial) if initial else None
    edges, verts, cands, steps = kern.run(oracle.query, code, preset, record)
    path = None if edges is None else Path(edges, verts)
    trace = OracleTrace(oracle.trace.queried[start:])
    candidates = None if cands is None else [Path.from_edges(g, c) for c in cands]
    return RunResult(g, path, trace, initial, candidates, steps)


def lazysp_reference(
    g: Multigraph,
    oracle: Oracle,
    selector: EdgeSelector,
    state: QueryState | None = None,
    record: bool = False,
) -> RunResult:
    """LazySP written directly on :func:`shortest_candidate_path`, recomputing the
    candidate after every query; accepts any selector callable."""
    st = QueryState(g) if state is None else state.copy()
    initial = tuple([(e, True) for e in sorted(st.q_yes)] + [(e, False) for e in sorted(st.q_no)])
    start = len(oracle.trace.queried)
    candidates: list[Path] | None = [] if record else None
    steps: list[int] | None = [] if record else None
    path = shortest_candidate_path(g, st)
    if path is not None and record:
        candidates.append(path)
    while path is not None:
        if all(e in st.q_yes for e in path.edges):
            break
        e = selector(path, frozenset(st.q_yes), frozenset(st.q_no))
        if e not in path.edges or st.is_queried(e):
            raise SelectorError(f"selector returned edge {e}, not an unqueried edge of the candidate path")
        if record:
            steps.append(len(candidates) - 1)
        st.record(e, oracle.query(e))
        prev, path = path, shortest_candidate_path(g, st)
        if path is not None and record and path.edges != prev.edges:
            candidates.append(path)
    result = RunResult(g, path, OracleTrace(oracle.trace.queried[start:]), initial, candidates, steps)
    result.__dict__["final_state"] = st
    return result


def is_connective_step(state_before: QueryState, chosen_edge: int) -> bool:
    """True iff the edge joins two different components of (V, q_yes)."""
    u, v = state_before.graph.edges[chosen_edge]
    uf = state_before.components
    return uf.find(u) != uf.find(v)


def connectivity_audit(result: RunResult) -> dict:
    """Replay a run's trace: count non-connective steps and check the component bound.

    Returns ``{"connective": bool, "violations": int, "yes_count": int,
    "components": int, "bound_ok": bool}``, where ``bound_ok`` checks
    ``yes_count <= n - components`` after every step.
    """
    g = result.graph
    uf = UnionFind(g.n)
    for e, a in result.initial:
        if a:
            uf.union(*g.edges[e])
    violations, yes, bound_ok = 0, 0, True
    base_yes = sum(1 for _, a in result.initial if a)
    for e, a in result.trace.queried:
        u, v = g.edges[e]
        if uf.find(u) == uf.find(v):
            violations += 1
        if a:
            yes += 1
            uf.union(u, v)
        if yes + base_yes > g.n - uf.count:
            bound_ok = False
    return {
        "connective": violations == 0,
        "violations": violations,
        "yes_count": yes,
        "components": uf.count,
        "bound_ok": bound_ok,
    }


def _bfs_dist(g: Multigraph, usable: Callable[[int], bool]) -> int | None:
    dist = [-1] * g.n
    dist[g.s] = 0
    q = deque([g.s])
    while q:
        u = q.popleft()
        if u == g.t:
            return dist[u]
        for e, w in g.incidence[u]:
            if dist[w] < 0 and usable(e):
                dist[w] = dist[u] + 1
                q.append(w)
    return None


def verify_termination(g: Multigraph, result: RunResult, sub: Subgraph) -> bool:
    """Independent check that ``result`` satisfies the certification condition for ``sub``."""
    present = sub.present
    st = result.final_state
    # the recorded answers must agree with the realization
    for e in st.q_yes:
        if not present[e]:
            return False
    for e in st.q_no:
        if present[e]:
            return False
    q_no = st.q_no
    surviving = _bfs_dist(g, lambda e: e not in q_no)
    if result.path is None:
        return surviving is None
    p = result.path
    if not p.is_valid(g):
        return False
    if any(e not in st.q_yes for e in p.edges):
        return False
    best_in_sub = _bfs_dist(g, lambda e: present[e])
    if best_in_sub is None or len(p) != best_in_sub:
        return False
    return surviving is not None and surviving >= len(p)


def alg_theorem2(gadget, oracle: Oracle, selector: EdgeSelector | str = forward_selector) -> RunResult:
    """Two-phase baseline on an annotated gadget.

    Phase 1 queries every edge of both B arcs.  If both or neither B arc has
    a path, LazySP finishes from the resulting state.  If exactly one does,
    the A arcs are scanned string by string (forward, stop at the first No) in
    the order sa, ab, bt when ``at`` is the live B arc and bt, ab, sa when
    ``sb`` is, stopping at the first A arc shown to have no path; the result is
    the shortest verified path or a no-path certificate.
    """
    arcs = getattr(gadget, "arcs", None)
    if not arcs or not {"sa", "ab", "bt", "sb", "at"} <= set(arcs):
        raise ValueError("alg_theorem2 needs a gadget with arc annotations")
    g = gadget.graph
    start = len(oracle.trace.queried)
    state = QueryState(g)

    def b_alive(arc) -> bool:
        alive = True
        for stage in arc.stages:
            hit = False
            for e in stage:
                answer = oracle.query(e)
                state.record(e, answer)
                hit = hit or answer
            alive = alive and hit
        return alive

    sb_ok = b_alive(arcs["sb"])
    at_ok = b_alive(arcs["at"])
    phase1 = len(oracle.trace.queried) - start
    if sb_ok == at_ok:
        sub = lazysp(g, oracle, selector, state=state)
        trace = OracleTrace(oracle.trace.queried[start:])
        return RunResult(g, sub.path, trace, info={"branch": "lazysp", "phase1_queries": phase1})

    order = ("sa", "ab", "bt") if at_ok else ("bt", "ab", "sa")
    for name in order:
        has_path = False
        for string in arcs[name].strings:
            ok = True
            for e in string:
                answer = oracle.query(e)
                state.record(e, answer)
                if not answer:
                    ok = False
                    break
            if ok:
                has_path = True
                break
        if not has_path:
            break

    path = _shortest_within(g, state.q_yes)
    trace = OracleTrace(oracle.trace.queried[start:])
    result = RunResult(g, path, trace, info={"branch": "scan", "phase1_queries": phase1, "scan_order": order})
    result.__dict__["final_state"] = state
    certified = _bfs_dist(g, lambda e: e not in state.q_no)
    if path is None:
        if certified is not None:
            raise AssertionError("two-phase baseline stopped without a certificate")
    elif certified is None or certified < len(path):
        raise AssertionError("two-phase baseline returned a path that is not certified shortest")
    return result


def _shortest_within(g: Multigraph, allowed: Iterable[int]) -> Path | None:
    """Minimum (length, edge ids) s-t path using only ``allowed`` edges."""
    ok = set(allowed)
    st = QueryState(g, ok, set(range(g.m)) - ok)
    return shortest_candidate_path(g, st)


def write_run_trace_csv(result: RunResult, path: str | FsPath, verbose: bool = False) -> None:
    """Trace CSV: ``step, edge_id, answer`` plus candidate path columns when ``verbose``.

    Verbose output needs a run recorded with ``record=True``.
    """
    if verbose and (result.candidates is None or result.step_candidate is None):
        raise ValueError("verbose trace needs a run recorded with record=True")
    header = ["step", "edge_id", "answer"]
    if verbose:
        header += ["candidate_path_length", "candidate_path_edges"]
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for i, (e, a) in enumerate(result.trace.queried):
                row: list = [i + 1, e, int(a)]
                if verbose:
                    cand = result.candidates[result.step_candidate[i]]
                    row += [len(cand), " ".join(map(str, cand.edges))]
                w.writerow(row)
    except OSError as exc:
        raise OSError(f"cannot write trace to {path}: {exc}") from exc
