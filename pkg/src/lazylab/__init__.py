"""Lazy shortest-path search under expensive edge evaluation."""

from ._backend import BACKEND
from .multigraph import (
    GraphError,
    Multigraph,
    Path,
    PathCountError,
    QueryState,
    build_graph,
    components_after,
    enumerate_paths_shorter_than,
    shortest_candidate_path,
)
from .oracle import (
    CoinSequence,
    Subgraph,
    bernoulli_oracle,
    deterministic_oracle,
    replay_oracle,
    yes_count,
)
from .search import (
    RunResult,
    alg_theorem2,
    backward_selector,
    bisection_selector,
    forward_selector,
    is_connective_step,
    lazysp,
    verify_termination,
)
from .optimal import (
    CoverProblem,
    exact_expected_cost,
    mdp_optimal,
    minimum_cover,
    omniscient_run,
)
from .constructions import GadgetParams, example_graph, lower_bound_chain, theorem2_gadget

__version__ = "0.1.0"
