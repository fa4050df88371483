"""Edge-existence oracles and the realized subgraph G' they answer for.

Every oracle answers each edge at most once and keeps an ordered trace; the
number of queries is the cost being minimized everywhere else in the package.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path as FsPath
from typing import Sequence

from .multigraph import GraphError, Multigraph

__all__ = [
    "MASK64",
    "mix64",
    "prf",
    "prf_uniform",
    "OracleError",
    "DuplicateQueryError",
    "CoinsExhaustedError",
    "Subgraph",
    "OracleTrace",
    "CoinSequence",
    "Oracle",
    "DeterministicOracle",
    "BernoulliOracle",
    "ReplayOracle",
    "deterministic_oracle",
    "bernoulli_oracle",
    "replay_oracle",
    "yes_count",
    "edge_probabilities",
    "write_trace_csv",
    "read_trace_csv",
]

MASK64 = (1 << 64) - 1


def mix64(x: int) -> int:
    """SplitMix64 finalizer: a bijective 64-bit avalanche mix."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def prf(seed: int, index: int) -> int:
    """Keyed 64-bit pseudorandom function of ``(seed, index)``."""
    return mix64(mix64(seed & MASK64) ^ (index & MASK64))


def prf_uniform(seed: int, index: int) -> float:
    """Uniform double in [0, 1) derived from :func:`prf`."""
    return (prf(seed, index) >> 11) * (1.0 / (1 << 53))


class OracleError(RuntimeError):
    pass


class DuplicateQueryError(OracleError):
    pass


class CoinsExhaustedError(OracleError):
    pass


@dataclass(frozen=True)
class Subgraph:
    graph: Multigraph
    present: tuple[bool, ...]

    def __post_init__(self):
        if len(self.present) != self.graph.m:
            raise GraphError(f"subgraph has {len(self.present)} flags for {self.graph.m} edges")

    @classmethod
    def from_mask(cls, g: Multigraph, mask: int) -> "Subgraph":
        return cls(g, tuple(bool(mask >> e & 1) for e in range(g.m)))

    @classmethod
    def from_edges(cls, g: Multigraph, present_edges) -> "Subgraph":
        keep = set(present_edges)
        return cls(g, tuple(e in keep for e in range(g.m)))

    @property
    def edge_set(self) -> frozenset[int]:
        return frozenset(e for e, ok in enumerate(self.present) if ok)

    @property
    def absent(self) -> frozenset[int]:
        return frozenset(e for e, ok in enumerate(self.present) if not ok)

    def to_json(self) -> str:
        return json.dumps({"present": [int(x) for x in self.present]}, separators=(",", ":")) + "\n"

    @classmethod
    def from_json(cls, g: Multigraph, text: str) -> "Subgraph":
        obj = json.loads(text)
        return cls(g, tuple(bool(x) for x in obj["present"]))


@dataclass
class OracleTrace:
    queried: list[tuple[int, bool]] = field(default_factory=list)

    @property
    def query_count(self) -> int:
        return len(self.queried)

    @property
    def edges(self) -> list[int]:
        return [e for e, _ in self.queried]

    @property
    def answers(self) -> list[bool]:
        return [a for _, a in self.queried]

    def copy(self) -> "OracleTrace":
        return OracleTrace(list(self.queried))


@dataclass(frozen=True)
class CoinSequence:
    bits: tuple[bool, ...]
    p: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"coin bias must lie in (0, 1), got {self.p}")

    @classmethod
    def flip(cls, count: int, p: float, seed: int) -> "CoinSequence":
        return cls(tuple(prf_uniform(seed, i) < p for i in range(count)), p)


class Oracle:
    """Base oracle: range and duplicate checks, trace bookkeeping.

    Subclasses implement ``_answer(edge)``.
    """

    def __init__(self, n_edges: int | None):
        self.n_edges = n_edges
        self.trace = OracleTrace()
        self._seen: set[int] = set()

    @property
    def query_count(self) -> int:
        return len(self.trace.queried)

    def query(self, edge: int) -> bool:
        if self.n_edges is not None and not 0 <= edge < self.n_edges:
            raise GraphError(f"edge id {edge} out of range [0, {self.n_edges})")
        if edge in self._seen:
            raise DuplicateQueryError(f"edge {edge} queried twice")
        answer = self._answer(edge)
        self._seen.add(edge)
        self.trace.queried.append((edge, answer))
        return answer

    __call__ = query

    def _answer(self, edge: int) -> bool:  # pragma: no cover - abstract
        raise NotImplementedError


class DeterministicOracle(Oracle):
    def __init__(self, sub: Subgraph):
        super().__init__(sub.graph.m)
        self.sub = sub
        self._present = sub.present

    def _answer(self, edge: int) -> bool:
        return self._present[edge]


def edge_probabilities(g: Multigraph, p) -> tuple[float, ...]:
    """Normalize a scalar or per-edge probability to a per-edge tuple, all in (0, 1)."""
    if isinstance(p, (int, float)):
        if not 0.0 < p < 1.0:
            raise ValueError(f"edge probability must lie in (0, 1), got {p}")
        return (float(p),) * g.m
    else:
        probs = tuple(float(x) for x in p)
        if len(probs) != g.m:
            raise ValueError(f"expected {g.m} edge probabilities, got {len(probs)}")
    for x in probs:
        if not 0.0 < x < 1.0:
            raise ValueError(f"edge probability must lie in (0, 1), got {x}")
    return probs


class BernoulliOracle(Oracle):
    """Edge ``e`` is present iff ``prf_uniform(seed, e) < p_e``; independent of query order."""

    def __init__(self, g: Multigraph, p, seed: int):
        super().__init__(g.m)
        self.graph = g
        self.probs = edge_probabilities(g, p)
        self.seed = seed & MASK64

    def _answer(self, edge: int) -> bool:
        return prf_uniform(self.seed, edge) < self.probs[edge]

    def realize(self) -> Subgraph:
        seed, probs = self.seed, self.probs
        return Subgraph(self.graph, tuple(prf_uniform(seed, e) < probs[e] for e in range(self.graph.m)))


class ReplayOracle(Oracle):
    """The i-th query, whichever edge it names, is answered by the i-th coin."""

    def __init__(self, coins: CoinSequence, n_edges: int | None = None):
        if not coins.bits:
            raise ValueError("replay oracle needs at least one coin")
        super().__init__(n_edges)
        self.coins = coins

    def _answer(self, edge: int) -> bool:
        i = len(self.trace.queried)
        if i >= len(self.coins.bits):
            raise CoinsExhaustedError(f"query {i + 1} exceeds the {len(self.coins.bits)} pre-flipped coins")
        return bool(self.coins.bits[i])

    def induced_subgraph(self, g: Multigraph, fill: bool = False) -> Subgraph:
        """Subgraph agreeing with every answer given so far; unqueried edges get ``fill``."""
        present = [fill] * g.m
        for e, a in self.trace.queried:
            present[e] = a
        return Subgraph(g, tuple(present))


def deterministic_oracle(sub: Subgraph) -> DeterministicOracle:
    return DeterministicOracle(sub)


def bernoulli_oracle(g: Multigraph, p, seed: int) -> BernoulliOracle:
    return BernoulliOracle(g, p, seed)


def replay_oracle(coins: CoinSequence, g: Multigraph | None = None) -> ReplayOracle:
    return ReplayOracle(coins, None if g is None else g.m)


def yes_count(trace: OracleTrace | Sequence[tuple[int, bool]]) -> int:
    queried = trace.queried if isinstance(trace, OracleTrace) else trace
    return sum(1 for _, a in queried if a)


def write_trace_csv(trace: OracleTrace, path: str | FsPath) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "edge_id", "answer"])
            for i, (e, a) in enumerate(trace.queried, start=1):
                w.writerow([i, e, int(a)])
    except OSError as exc:
        raise OSError(f"cannot write trace to {path}: {exc}") from exc


def read_trace_csv(path: str | FsPath) -> OracleTrace:
    """Read a trace CSV; extra columns (candidate path details) are ignored."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append((int(row["step"]), int(row["edge_id"]), row["answer"].strip().lower() in ("1", "yes", "true")))
    rows.sort()
    return OracleTrace([(e, a) for _, e, a in rows])
