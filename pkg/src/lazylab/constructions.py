"""Graph generators: the adversarial gadget with its A/B structures, the
parallel-edge lower-bound chain, random multigraphs, and the small worked
example used throughout the tests."""

from __future__ import annotations

import math
import random
from dataclasses import asdict, dataclass, field

from .multigraph import Multigraph, build_graph
from .oracle import Subgraph

__all__ = [
    "Fragment",
    "structure_a",
    "structure_b",
    "GadgetParams",
    "ArcInfo",
    "AnnotatedGadget",
    "theorem2_gadget",
    "gadget_from_annotations",
    "lower_bound_chain",
    "chain_multiplicity",
    "random_multigraph",
    "random_small_multigraph",
    "example_graph",
    "EXAMPLE_NAMES",
]


@dataclass(frozen=True)
class Fragment:
    """Two-terminal fragment; local vertex 0 is ``c``, 1 is ``d``, internal vertices follow.

    ``groups`` lists edge indices per string (structure A) or per stage
    (structure B), each in c-to-d order.
    """

    n_internal: int
    edges: tuple[tuple[int, int], ...]
    groups: tuple[tuple[int, ...], ...]

    def as_graph(self) -> Multigraph:
        return build_graph(self.n_internal + 2, self.edges, 0, 1)


def structure_a(kappa: int, ell: int) -> Fragment:
    """``kappa`` vertex-disjoint c-d strings of ``ell`` edges each."""
    if kappa < 1 or ell < 1:
        raise ValueError("kappa and ell must be at least 1")
    edges, groups = [], []
    nxt = 2
    for _ in range(kappa):
        prev, string = 0, []
        for j in range(ell):
            if j == ell - 1:
                cur = 1
            else:
                cur, nxt = nxt, nxt + 1
            string.append(len(edges))
            edges.append((prev, cur))
            prev = cur
        groups.append(tuple(string))
    return Fragment(nxt - 2, tuple(edges), tuple(groups))


def structure_b(kappa_prime: int, ell_prime: int) -> Fragment:
    """Series chain of ``ell_prime`` stages, each ``kappa_prime`` parallel edges."""
    if kappa_prime < 1 or ell_prime < 1:
        raise ValueError("kappa_prime and ell_prime must be at least 1")
    edges, groups = [], []
    prev = 0
    for j in range(ell_prime):
        cur = 1 if j == ell_prime - 1 else j + 2
        stage = []
        for _ in range(kappa_prime):
            stage.append(len(edges))
            edges.append((prev, cur))
        groups.append(tuple(stage))
        prev = cur
    return Fragment(ell_prime - 1, tuple(edges), tuple(groups))


@dataclass(frozen=True)
class GadgetParams:
    kappa: int = 10**4
    kappa_prime: int = 2
    epsilon: float = 1e-2
    delta: float = 1e-3
    ell: int | None = None
    ell_prime: int | None = None

    def __post_init__(self):
        if not (0 < self.epsilon < 1 and 0 < self.delta < 1):
            raise ValueError("epsilon and delta must lie in (0, 1)")
        if self.kappa < 1 or self.kappa_prime < 1:
            raise ValueError("kappa and kappa_prime must be at least 1")
        if self.ell is None:
            ell = math.ceil(math.log(self.kappa / self.delta) / self.epsilon)
            object.__setattr__(self, "ell", max(1, ell))
        if self.ell_prime is None:
            object.__setattr__(self, "ell_prime", 3 * self.ell)
        if self.ell < 1 or self.ell_prime < 1:
            raise ValueError("ell and ell_prime must be at least 1")

    @classmethod
    def paper(cls) -> "GadgetParams":
        return cls(kappa=10**4, kappa_prime=2, epsilon=1e-2, delta=1e-3)

    @property
    def p(self) -> float:
        return 1.0 - self.epsilon

    @property
    def edge_count(self) -> int:
        return 3 * self.kappa * self.ell + 2 * self.kappa_prime * self.ell_prime

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ArcInfo:
    kind: str  # "A" or "B"
    terminals: tuple[int, int]
    edges: tuple[int, ...]
    groups: tuple[tuple[int, ...], ...]

    @property
    def strings(self) -> tuple[tuple[int, ...], ...]:
        if self.kind != "A":
            raise AttributeError("only A arcs have strings")
        return self.groups

    @property
    def stages(self) -> tuple[tuple[int, ...], ...]:
        if self.kind != "B":
            raise AttributeError("only B arcs have stages")
        return self.groups

    def has_path(self, present) -> bool:
        """Whether the realized arc connects its terminals."""
        if self.kind == "A":
            return any(all(present[e] for e in string) for string in self.groups)
        return all(any(present[e] for e in stage) for stage in self.groups)


ARC_LAYOUT = (("sa", "A", "s", "a"), ("ab", "A", "a", "b"), ("bt", "A", "b", "t"),
              ("sb", "B", "s", "b"), ("at", "B", "a", "t"))
JUNCTIONS = {"s": 0, "a": 1, "b": 2, "t": 3}


@dataclass(frozen=True)
class AnnotatedGadget:
    graph: Multigraph
    arcs: dict[str, ArcInfo]
    params: GadgetParams = field(default_factory=GadgetParams)

    @property
    def p(self) -> float:
        return self.params.p

    def annotations(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "p": self.p,
            "arcs": {
                name: {
                    "kind": arc.kind,
                    "terminals": list(arc.terminals),
                    "groups": [list(grp) for grp in arc.groups],
                }
                for name, arc in self.arcs.items()
            },
        }

    def case(self, sub: Subgraph) -> int:
        """Case of the suboptimality argument the realization falls in.

        1: some A arc has a path; 2: no A arc has one and exactly one B arc
        does; 3: otherwise.
        """
        pres = sub.present
        if any(self.arcs[a].has_path(pres) for a in ("sa", "ab", "bt")):
            return 1
        if self.arcs["sb"].has_path(pres) != self.arcs["at"].has_path(pres):
            return 2
        return 3


def theorem2_gadget(params: GadgetParams) -> AnnotatedGadget:
    """Junctions s, a, b, t; structure A on sa, ab, bt and structure B on sb, at.

    Arcs share only junction vertices.  Edge ids run arc by arc in the order
    sa, ab, bt, sb, at.
    """
    frag_a = structure_a(params.kappa, params.ell)
    frag_b = structure_b(params.kappa_prime, params.ell_prime)
    n = 4
    edges: list[tuple[int, int]] = []
    arcs = {}
    for name, kind, c, d in ARC_LAYOUT:
        frag = frag_a if kind == "A" else frag_b
        local = [JUNCTIONS[c], JUNCTIONS[d]] + list(range(n, n + frag.n_internal))
        n += frag.n_internal
        base = len(edges)
        edges.extend((local[u], local[v]) for u, v in frag.edges)
        arcs[name] = ArcInfo(
            kind,
            (JUNCTIONS[c], JUNCTIONS[d]),
            tuple(range(base, len(edges))),
            tuple(tuple(base + i for i in grp) for grp in frag.groups),
        )
    return AnnotatedGadget(build_graph(n, edges, JUNCTIONS["s"], JUNCTIONS["t"]), arcs, params)


def gadget_from_annotations(g: Multigraph, annotations: dict) -> AnnotatedGadget:
    params = GadgetParams(**annotations["params"])
    arcs = {
        name: ArcInfo(a["kind"], tuple(a["terminals"]),
                      tuple(e for grp in a["groups"] for e in grp),
                      tuple(tuple(grp) for grp in a["groups"]))
        for name, a in annotations["arcs"].items()
    }
    return AnnotatedGadget(g, arcs, params)


def chain_multiplicity(n: int, p: float) -> int:
    """``floor((n - 1) / (2p))``; the 1e-9 slack absorbs binary rounding of p."""
    return math.floor((n - 1) / (2 * p) + 1e-9)


def lower_bound_chain(n: int, p: float) -> Multigraph:
    """Path v_1 = s, ..., v_n = t with ``m + 1`` parallel edges per hop."""
    if n < 2:
        raise ValueError("chain needs at least 2 vertices")
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    copies = chain_multiplicity(n, p) + 1
    edges = [(i, i + 1) for i in range(n - 1) for _ in range(copies)]
    return build_graph(n, edges, 0, n - 1)


def random_multigraph(n: int, edge_factor: float, seed: int) -> Multigraph:
    """Random spanning tree plus ``round(edge_factor * n)`` uniform extra edges.

    s = 0 and t = n - 1; parallel edges allowed; deterministic per seed.
    """
    if n < 2:
        raise ValueError("need at least 2 vertices")
    if edge_factor < 1:
        raise ValueError("edge_factor must be at least 1")
    rng = random.Random(seed)
    order = list(range(n))
    rng.shuffle(order)
    edges = []
    for i in range(1, n):
        edges.append((order[rng.randrange(i)], order[i]))
    for _ in range(round(edge_factor * n)):
        u = rng.randrange(n)
        v = rng.randrange(n - 1)
        if v >= u:
            v += 1
        edges.append((u, v))
    return build_graph(n, edges, 0, n - 1)


def random_small_multigraph(seed: int, max_vertices: int = 5, max_edges: int = 8) -> Multigraph:
    """Tiny arbitrary multigraph for exhaustive checks; s and t need not be connected."""
    rng = random.Random(seed)
    n = rng.randint(2, max_vertices)
    m = rng.randint(1, max_edges)
    edges = []
    for _ in range(m):
        u = rng.randrange(n)
        v = rng.randrange(n - 1)
        if v >= u:
            v += 1
        edges.append((u, v))
    return build_graph(n, edges, 0, n - 1)


EXAMPLE_NAMES = ("s", "a", "b", "c", "d", "e", "t")


def example_graph() -> tuple[Multigraph, Subgraph]:
    """The seven-vertex worked example and its realization.

    Edge ids 0-8 follow the query order of the forward-selector run; edges 9
    (c-d) and 10 (c-b) are present but never queried.
    """
    s, a, b, c, d, e, t = range(7)
    edges = [(s, a), (a, t), (a, b), (b, t), (s, c), (b, d), (d, t), (d, e), (e, t), (c, d), (c, b)]
    present = (True, False, True, False, False, True, False, True, True, True, True)
    g = build_graph(7, edges, s, t)
    return g, Subgraph(g, present)
