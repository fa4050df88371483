import itertools
import json
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from lazylab.constructions import GadgetParams, random_small_multigraph, theorem2_gadget
from lazylab.multigraph import build_graph, enumerate_paths_shorter_than
from lazylab.oracle import BernoulliOracle, DeterministicOracle, Subgraph, prf
from lazylab.optimal import (
    CapExceededError,
    CoverError,
    CoverProblem,
    decision_tree_expected_cost,
    exact_expected_cost,
    exhaustive_cover,
    mdp_optimal,
    mdp_policy_run,
    minimum_cover,
    omniscient_run,
    save_policy,
)
from lazylab.search import alg_theorem2, lazysp, verify_termination

from conftest import all_subgraphs, parallel, series
from strategies import multigraphs

SELECTORS = ("forward", "backward", "bisection")


def _problem(g, sub):
    from lazylab.search import _shortest_within

    p_star = _shortest_within(g, sub.edge_set)
    bound = float("inf") if p_star is None else len(p_star)
    return CoverProblem(enumerate_paths_shorter_than(g, bound), sub.absent, p_star)


def test_cover_empty():
    g = series(2)
    assert minimum_cover(CoverProblem([], frozenset())) == frozenset()


def test_cover_disjoint_paths():
    g = build_graph(5, [(0, 1), (1, 4), (0, 2), (2, 4), (0, 3), (3, 4)], 0, 4)
    paths = enumerate_paths_shorter_than(g)
    cover = minimum_cover(CoverProblem(paths, frozenset({1, 2, 5})))
    assert cover == frozenset({1, 2, 5})


def test_cover_infeasible():
    g = series(2)
    with pytest.raises(CoverError):
        minimum_cover(CoverProblem(enumerate_paths_shorter_than(g), frozenset()))


def test_cover_cap():
    g = parallel(6)
    with pytest.raises(CapExceededError):
        minimum_cover(CoverProblem(enumerate_paths_shorter_than(g), frozenset(range(6))), cap=5)


def test_cover_rejects_long_paths():
    g = series(2)
    with pytest.raises(ValueError):
        CoverProblem(enumerate_paths_shorter_than(g), frozenset({0}), p_star=enumerate_paths_shorter_than(g)[0])


def test_cover_picks_lexicographically_smallest():
    # two paths sharing nothing; each has two absent edges
    g = build_graph(4, [(0, 1), (1, 3), (0, 2), (2, 3)], 0, 3)
    cover = minimum_cover(CoverProblem(enumerate_paths_shorter_than(g), frozenset(range(4))))
    assert cover == frozenset({0, 2})


@pytest.mark.parametrize("seed", range(200))
def test_cover_matches_exhaustive(seed):
    rng = random.Random(seed)
    g = random_small_multigraph(seed, max_vertices=6, max_edges=14)
    sub = Subgraph(g, tuple(rng.random() < 0.5 for _ in range(g.m)))
    prob = _problem(g, sub)
    assert minimum_cover(prob) == exhaustive_cover(prob)


def test_omniscient_example(example):
    g, sub = example
    r = omniscient_run(g, sub)
    assert r.path.edges == (0, 2, 5, 7, 8)
    # every path shorter than 5 must lose one of the dashed edges a-t, b-t, s-c, d-t
    assert r.info["cover"] == [1, 3, 4, 6]
    assert r.cost == len(r.path) + len(r.info["cover"]) == 9
    assert r.cost <= lazysp(g, DeterministicOracle(sub), "forward").cost
    assert verify_termination(g, r, sub)


def test_omniscient_single_edge():
    g = build_graph(2, [(0, 1)], 0, 1)
    assert omniscient_run(g, Subgraph(g, (True,))).cost == 1


def test_omniscient_no_path():
    g = series(3)
    r = omniscient_run(g, Subgraph(g, (True, False, True)))
    assert r.path is None and r.cost == 1


@pytest.mark.parametrize("seed", range(40))
def test_omniscient_never_worse_than_lazysp(seed):
    g = random_small_multigraph(seed, max_vertices=5, max_edges=7)
    for sub in all_subgraphs(g):
        r = omniscient_run(g, sub)
        assert verify_termination(g, r, sub)
        for sel in SELECTORS:
            assert r.cost <= lazysp(g, DeterministicOracle(sub), sel).cost


def test_mdp_two_parallel_edges():
    sol = mdp_optimal(parallel(2), 0.5)
    assert sol.expected_cost == pytest.approx(1.5, abs=1e-12)


def test_mdp_series():
    g = series(2)
    sol = mdp_optimal(g, 0.5)
    assert sol.expected_cost == pytest.approx(1.5, abs=1e-12)
    assert exact_expected_cost(g, 0.5, lambda gg, o: lazysp(gg, o)) == pytest.approx(1.5, abs=1e-12)


def test_mdp_terminal_action():
    g = series(2)
    sol = mdp_optimal(g, 0.5)
    assert sol.action(0b11, 0) is None
    assert sol.action(0, 0b01) is None


def test_mdp_cap():
    with pytest.raises(CapExceededError):
        mdp_optimal(parallel(19), 0.5)


def test_mdp_heterogeneous_probabilities():
    # query the likelier edge first: 1 + 0.1 * 1 = 1.1
    sol = mdp_optimal(parallel(2), (0.1, 0.9))
    assert sol.expected_cost == pytest.approx(1.1)
    assert sol.action(0, 0) == 1


def _algorithms():
    return {sel: (lambda gg, o, s=sel: lazysp(gg, o, s)) for sel in SELECTORS}


@pytest.mark.parametrize("seed", range(30))
def test_pruning_is_sound(seed):
    g = random_small_multigraph(seed, max_vertices=5, max_edges=8)
    rng = random.Random(seed)
    probs = tuple(rng.choice((0.3, 0.5, 0.8)) for _ in range(g.m))
    a = mdp_optimal(g, probs, prune=True).expected_cost
    b = mdp_optimal(g, probs, prune=False).expected_cost
    assert a == pytest.approx(b, abs=1e-9)


@given(multigraphs(max_vertices=5, max_edges=9), st.sampled_from([0.2, 0.5, 0.9]))
def test_optimal_dominates_every_selector(g, p):
    best = mdp_optimal(g, p).expected_cost
    for fn in _algorithms().values():
        assert best <= exact_expected_cost(g, p, fn) + 1e-9


@given(multigraphs(max_vertices=5, max_edges=8), st.sampled_from([0.3, 0.7]))
def test_policy_run_is_correct_and_matches_value(g, p):
    sol = mdp_optimal(g, p)
    policy_cost = exact_expected_cost(g, p, lambda gg, o: mdp_policy_run(sol, o))
    assert policy_cost == pytest.approx(sol.expected_cost, abs=1e-9)
    for sub in all_subgraphs(g):
        assert verify_termination(g, mdp_policy_run(sol, DeterministicOracle(sub)), sub)


@given(multigraphs(max_vertices=6, max_edges=10), st.sampled_from([0.3, 0.6]))
def test_decision_tree_equals_enumeration(g, p):
    for fn in _algorithms().values():
        assert decision_tree_expected_cost(g, p, fn) == pytest.approx(exact_expected_cost(g, p, fn), abs=1e-9)


def test_exact_cost_single_edge():
    g = build_graph(2, [(0, 1)], 0, 1)
    for fn in _algorithms().values():
        assert exact_expected_cost(g, 0.37, fn) == pytest.approx(1.0)


def test_exact_cost_cap():
    with pytest.raises(CapExceededError):
        exact_expected_cost(parallel(21), 0.5, lambda g, o: lazysp(g, o))


def test_exact_cost_agrees_with_monte_carlo():
    g = build_graph(4, [(0, 1), (1, 3), (0, 2), (2, 3), (1, 2), (0, 3)], 0, 3)
    fn = lambda gg, o: lazysp(gg, o, "bisection")  # noqa: E731
    exact = exact_expected_cost(g, 0.6, fn)
    costs = [fn(g, BernoulliOracle(g, 0.6, prf(5, i))).cost for i in range(100_000)]
    mean = sum(costs) / len(costs)
    var = sum((c - mean) ** 2 for c in costs) / (len(costs) - 1)
    assert abs(mean - exact) <= 3 * (var / len(costs)) ** 0.5


def test_miniature_gadget_optimal_below_lazysp():
    gad = theorem2_gadget(GadgetParams(kappa=1, ell=2, kappa_prime=2, ell_prime=3, epsilon=0.4))
    g = gad.graph
    assert g.m == 18
    best = mdp_optimal(g, gad.p).expected_cost
    for fn in _algorithms().values():
        assert best <= decision_tree_expected_cost(g, gad.p, fn) + 1e-9
    alg = decision_tree_expected_cost(g, gad.p, lambda gg, o: alg_theorem2(gad, o))
    assert best <= alg + 1e-9


def test_policy_export(tmp_path):
    sol = mdp_optimal(parallel(2), 0.5)
    save_policy(sol, tmp_path / "policy.json")
    data = json.loads((tmp_path / "policy.json").read_text())
    assert data == {"root_expected_cost": 1.5, "policy": {"0x0:0x0": 0, "0x0:0x1": 1}}
