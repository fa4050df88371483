import time

import pytest
from hypothesis import given
from hypothesis import strategies as st

from lazylab.constructions import GadgetParams, random_multigraph, random_small_multigraph, theorem2_gadget
from lazylab.multigraph import Path, QueryState, build_graph, enumerate_paths_shorter_than
from lazylab.oracle import BernoulliOracle, DeterministicOracle, Oracle, OracleTrace, Subgraph, prf
from lazylab.optimal import exact_expected_cost
from lazylab.search import (
    RunResult,
    SelectorError,
    alg_theorem2,
    backward_selector,
    bisection_selector,
    connectivity_audit,
    forward_selector,
    is_connective_step,
    lazysp,
    lazysp_reference,
    verify_termination,
    write_run_trace_csv,
)

from conftest import A, B, C, D, E, S, T, all_subgraphs, series
from strategies import graph_and_mask, multigraphs

SELECTORS = ("forward", "backward", "bisection")


def _names(path):
    return "".join("sabcdet"[v] for v in path.vertices)


def test_example_trace(example):
    g, sub = example
    r = lazysp(g, DeterministicOracle(sub), "forward", record=True)
    assert r.trace.queried == [(0, True), (1, False), (2, True), (3, False), (4, False),
                               (5, True), (6, False), (7, True), (8, True)]
    assert [_names(p) for p in r.candidates] == ["sat", "sabt", "scdt", "sabdt", "sabdet"]
    assert _names(r.path) == "sabdet"
    assert verify_termination(g, r, sub)


def test_example_reference_agrees(example):
    g, sub = example
    fast = lazysp(g, DeterministicOracle(sub), "forward", record=True)
    ref = lazysp_reference(g, DeterministicOracle(sub), forward_selector, record=True)
    assert fast.trace.queried == ref.trace.queried
    assert fast.candidates == ref.candidates
    assert fast.step_candidate == ref.step_candidate == [0, 0, 1, 1, 2, 3, 3, 4, 4]


def test_forward_selector_examples(example):
    g, _ = example
    sat = Path.from_edges(g, [0, 1])
    assert forward_selector(sat, frozenset(), frozenset()) == 0
    sabt = Path.from_edges(g, [0, 2, 3])
    assert forward_selector(sabt, frozenset({0, 2}), frozenset()) == 3
    assert backward_selector(sat, frozenset(), frozenset()) == 1


def _line(k):
    g = series(k)
    return g, Path.from_edges(g, list(range(k)))


def test_backward_and_single_edge():
    g, p = _line(3)
    assert backward_selector(p, frozenset({1, 2}), frozenset()) == 0
    g1, p1 = _line(1)
    for sel in (forward_selector, backward_selector, bisection_selector):
        assert sel(p1, frozenset(), frozenset()) == 0


def _bisection_brute(k, queried):
    """Max over unqueried positions of the distance to the nearest queried position; ties toward s."""
    if not queried:
        return (k - 1) // 2
    best, best_d = None, -1
    for i in range(k):
        if i in queried:
            continue
        d = min(abs(i - j) for j in queried)
        if d > best_d:
            best, best_d = i, d
    return best


def test_bisection_examples():
    g, p = _line(5)
    assert bisection_selector(p, frozenset(), frozenset()) == 2
    g, p = _line(3)
    assert bisection_selector(p, frozenset({0}), frozenset()) == 2


@given(st.integers(1, 12), st.data())
def test_bisection_matches_brute_force(k, data):
    g, p = _line(k)
    queried = data.draw(st.sets(st.integers(0, k - 1), max_size=k - 1))
    yes = frozenset(e for e in queried if e % 2 == 0)
    no = frozenset(queried - yes)
    assert bisection_selector(p, yes, no) == _bisection_brute(k, queried)


def test_selector_on_fully_queried_path():
    g, p = _line(2)
    with pytest.raises(SelectorError):
        forward_selector(p, frozenset({0, 1}), frozenset())


def test_single_edge_run():
    g = build_graph(2, [(0, 1)], 0, 1)
    r = lazysp(g, DeterministicOracle(Subgraph(g, (True,))))
    assert r.cost == 1 and r.path.edges == (0,)


def test_series_chain_cost_and_expectation():
    g = series(2)
    r = lazysp(g, DeterministicOracle(Subgraph(g, (True, True))))
    assert r.cost == 2
    for p in (0.3, 0.5, 0.8):
        assert exact_expected_cost(g, p, lambda gg, o: lazysp(gg, o)) == pytest.approx(1 + p, abs=1e-12)


def test_connective_step_examples():
    g = build_graph(3, [(0, 1), (1, 2), (0, 2)], 0, 2)
    st_ = QueryState(g)
    assert is_connective_step(st_, 0)
    st_.record(0, True)
    st_.record(1, True)
    assert not is_connective_step(st_, 2)


@pytest.mark.parametrize("seed", range(100))
def test_forward_runs_are_connective(seed):
    g = random_multigraph(20, 2.0, seed)
    r = lazysp(g, BernoulliOracle(g, 0.5, prf(seed, 1)), "forward")
    audit = connectivity_audit(r)
    assert audit["connective"] and audit["bound_ok"]
    assert audit["yes_count"] <= g.n - 1


def test_verify_termination_rejects_fabrications(example):
    g, sub = example
    fake = RunResult(g, Path.from_edges(g, [0, 1]), OracleTrace([(0, True), (1, True)]))
    assert not verify_termination(g, fake, sub)
    # no-path claim while s-a-b-d-e-t survives unqueried
    fake = RunResult(g, None, OracleTrace([(1, False)]))
    assert not verify_termination(g, fake, sub)
    # unverified edge on the claimed path
    fake = RunResult(g, Path.from_edges(g, [0, 2, 5, 7, 8]), OracleTrace([(0, True)]))
    assert not verify_termination(g, fake, sub)


def test_unknown_selector_edge_rejected(example):
    g, sub = example
    with pytest.raises(SelectorError):
        lazysp(g, DeterministicOracle(sub), lambda path, y, n: 10)


def test_custom_selector_uses_reference(example):
    g, sub = example
    calls = []

    def last_then_first(path, q_yes, q_no):
        calls.append(path.edges)
        return backward_selector(path, q_yes, q_no)

    r = lazysp(g, DeterministicOracle(sub), last_then_first)
    assert calls and verify_termination(g, r, sub)
    assert r.trace.queried == lazysp(g, DeterministicOracle(sub), "backward").trace.queried


def test_preloaded_state_is_not_requeried(example):
    g, sub = example
    st_ = QueryState(g, {0}, {1})
    r = lazysp(g, DeterministicOracle(sub), "forward", state=st_)
    assert 0 not in r.trace.edges and 1 not in r.trace.edges
    assert verify_termination(g, r, sub)


@pytest.mark.parametrize("seed", range(60))
def test_exhaustive_small_graphs(seed):
    """Every realization of small graphs: certified answers, no re-queries, candidate order, connectivity."""
    g = random_small_multigraph(seed, max_vertices=5, max_edges=8)
    for sub in all_subgraphs(g):
        lengths = set()
        for sel in SELECTORS:
            r = lazysp(g, DeterministicOracle(sub), sel, record=True)
            assert verify_termination(g, r, sub)
            assert len(set(r.trace.edges)) == r.cost
            cl = [len(p) for p in r.candidates]
            assert cl == sorted(cl)
            lengths.add(None if r.path is None else len(r.path))
            if sel != "bisection":
                audit = connectivity_audit(r)
                assert audit["connective"] and audit["bound_ok"]
        assert len(lengths) == 1


@given(graph_and_mask(max_vertices=7, max_edges=12), st.sampled_from(SELECTORS))
def test_kernel_matches_reference(case, sel):
    g, mask = case
    sub = Subgraph.from_mask(g, mask)
    from lazylab.search import SELECTORS as FN

    ref = lazysp_reference(g, DeterministicOracle(sub), FN[sel], record=True)
    for pure in (False, True):
        fast = lazysp(g, DeterministicOracle(sub), sel, record=True, pure=pure)
        assert fast.trace.queried == ref.trace.queried
        assert fast.path == ref.path
        assert fast.candidates == ref.candidates
        assert fast.step_candidate == ref.step_candidate


@pytest.mark.parametrize("seed", range(20))
def test_kernel_matches_reference_on_larger_graphs(seed):
    g = random_multigraph(40, 3.0, seed)
    from lazylab.search import SELECTORS as FN

    for sel in SELECTORS:
        o = lambda: BernoulliOracle(g, 0.6, prf(seed, 9))  # noqa: E731
        ref = lazysp_reference(g, o(), FN[sel])
        fast = lazysp(g, o(), sel)
        pure = lazysp(g, o(), sel, pure=True)
        assert fast.trace.queried == ref.trace.queried == pure.trace.queried
        assert fast.path == ref.path == pure.path


@given(multigraphs(max_vertices=8, max_edges=14), st.integers(0, 2**32))
def test_selectors_agree_on_outcome(g, seed):
    lens = set()
    for sel in SELECTORS:
        r = lazysp(g, BernoulliOracle(g, 0.5, seed), sel)
        lens.add(None if r.path is None else len(r.path))
    assert len(lens) == 1


# ---------------------------------------------------------------- two-phase baseline


def _mini(kappa=2, ell=2, kappa_prime=2, ell_prime=3, epsilon=0.3):
    return theorem2_gadget(GadgetParams(kappa=kappa, ell=ell, kappa_prime=kappa_prime,
                                        ell_prime=ell_prime, epsilon=epsilon))


def _present_for(gad, alive):
    """Realization where each named arc is fully present or has exactly its first edges absent."""
    present = [True] * gad.graph.m
    for name, arc in gad.arcs.items():
        if name in alive:
            continue
        if arc.kind == "A":
            for string in arc.strings:
                present[string[0]] = False
        else:
            for e in arc.stages[0]:
                present[e] = False
    return Subgraph(gad.graph, tuple(present))


def test_alg_scans_only_sa_when_at_alive():
    gad = _mini()
    sub = _present_for(gad, alive={"at", "ab", "bt"})
    r = alg_theorem2(gad, DeterministicOracle(sub))
    b_edges = set(gad.arcs["sb"].edges) | set(gad.arcs["at"].edges)
    assert set(r.trace.edges[: len(b_edges)]) == b_edges
    rest = r.trace.edges[len(b_edges):]
    assert rest == [s[0] for s in gad.arcs["sa"].strings]
    assert r.info["branch"] == "scan" and verify_termination(gad.graph, r, sub)


def test_alg_mirrors_when_sb_alive():
    gad = _mini()
    sub = _present_for(gad, alive={"sb", "sa", "ab"})
    r = alg_theorem2(gad, DeterministicOracle(sub))
    assert r.info["scan_order"] == ("bt", "ab", "sa")
    assert verify_termination(gad.graph, r, sub)


def test_alg_delegates_when_both_b_alive():
    gad = _mini()
    sub = _present_for(gad, alive={"sb", "at"})
    r = alg_theorem2(gad, DeterministicOracle(sub))
    nb = len(gad.arcs["sb"].edges) + len(gad.arcs["at"].edges)
    preset = QueryState(gad.graph)
    for e, a in r.trace.queried[:nb]:
        preset.record(e, a)
    tail = lazysp(gad.graph, DeterministicOracle(sub), "forward", state=preset)
    assert r.trace.queried[nb:] == tail.trace.queried
    assert r.info["branch"] == "lazysp" and verify_termination(gad.graph, r, sub)


def test_alg_requires_annotations(example):
    g, sub = example
    with pytest.raises(ValueError):
        alg_theorem2(g, DeterministicOracle(sub))


class _Unscripted(Exception):
    pass


class _Script(Oracle):
    def __init__(self, m, script):
        super().__init__(m)
        self.script = script

    def _answer(self, e):
        if e not in self.script:
            raise _Unscripted(e)
        return self.script[e]


def _certified(g, r):
    q_no = r.final_state.q_no
    alive = [e for e in range(g.m) if e not in q_no]
    from lazylab.multigraph import bfs_distance

    surviving = bfs_distance(g, alive)
    if r.path is None:
        return surviving is None
    return all(e in r.final_state.q_yes for e in r.path.edges) and surviving == len(r.path)


@pytest.mark.slow
def test_alg_exhaustive_on_miniature_gadget():
    """All 2^24 realizations, grouped by the answer sequence the algorithm sees.

    Each leaf of the decision tree is an equivalence class of realizations;
    a certified leaf is correct for every realization in its class, and the
    realization with every unqueried edge present is checked explicitly.
    """
    gad = _mini()
    g = gad.graph
    assert g.m == 24
    leaves, mass = 0, 0
    stack = [{}]
    while stack:
        script = stack.pop()
        try:
            r = alg_theorem2(gad, _Script(g.m, script))
        except _Unscripted as exc:
            e = exc.args[0]
            stack.append({**script, e: True})
            stack.append({**script, e: False})
            continue
        leaves += 1
        mass += 1 << (g.m - len(script))
        assert _certified(g, r)
        fill = Subgraph(g, tuple(script.get(e, True) for e in range(g.m)))
        assert verify_termination(g, r, fill)
    assert mass == 1 << g.m


def test_run_trace_csv(tmp_path, example):
    g, sub = example
    r = lazysp(g, DeterministicOracle(sub), record=True)
    write_run_trace_csv(r, tmp_path / "t.csv", verbose=True)
    text = (tmp_path / "t.csv").read_text().splitlines()
    assert text[0].startswith("step,edge_id,answer")
    assert len(text) == 10
