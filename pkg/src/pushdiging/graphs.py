"""Time-varying directed communication graphs.

Agents are labelled ``1..n_agents``. An edge ``(j, i)`` means agent ``j``
sends to agent ``i``. Self-loops are never stored; every agent always hears
itself and the mixing layer adds the diagonal.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Digraph",
    "GraphSequence",
    "GraphGenerationError",
    "union_graph",
    "is_strongly_connected",
    "verify_b0_connectivity",
    "b0_connectivity_report",
    "make_ring",
    "make_periodic_partition",
    "make_random_sequence",
    "sequence_to_dict",
    "sequence_from_dict",
    "dump_sequence",
    "load_sequence",
]


class GraphGenerationError(RuntimeError):
    """A generator could not produce a sequence meeting its contract."""


@dataclass(frozen=True)
class Digraph:
    """Directed graph over agents ``1..n_agents`` with implicit self-loops."""

    n_agents: int
    edges: frozenset[tuple[int, int]] = frozenset()

    def __post_init__(self):
        if int(self.n_agents) != self.n_agents or self.n_agents < 1:
            raise ValueError(f"n_agents must be a positive integer, got {self.n_agents!r}")
        edges = frozenset((int(j), int(i)) for j, i in self.edges)
        for j, i in edges:
            if not (1 <= j <= self.n_agents and 1 <= i <= self.n_agents):
                raise ValueError(f"edge ({j}, {i}) has an endpoint outside 1..{self.n_agents}")
            if j == i:
                raise ValueError(f"explicit self-loop ({j}, {i}); self-loops are implicit")
        object.__setattr__(self, "edges", edges)

    @classmethod
    def from_edges(cls, n_agents: int, edges: Iterable[tuple[int, int]]) -> "Digraph":
        edges = list(edges)
        if len(set(edges)) != len(edges):
            raise ValueError("duplicate edges")
        return cls(n_agents, frozenset(edges))

    def in_neighbors(self, i: int) -> list[int]:
        return sorted(j for j, t in self.edges if t == i)

    def out_neighbors(self, j: int) -> list[int]:
        return sorted(t for s, t in self.edges if s == j)

    def out_degrees(self) -> np.ndarray:
        """Out-degree of every agent, self excluded (index 0 is agent 1)."""
        deg = np.zeros(self.n_agents, dtype=int)
        for j, _ in self.edges:
            deg[j - 1] += 1
        return deg

    def adjacency(self) -> np.ndarray:
        """Boolean matrix with ``adj[i-1, j-1]`` set when ``j`` sends to ``i``."""
        adj = np.zeros((self.n_agents, self.n_agents), dtype=bool)
        for j, i in self.edges:
            adj[i - 1, j - 1] = True
        return adj

    def symmetrized(self) -> "Digraph":
        return Digraph(self.n_agents, self.edges | frozenset((i, j) for j, i in self.edges))

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)


class GraphSequence:
    """Deterministic map from iteration index ``k`` to a :class:`Digraph`.

    Periodic sequences are built from a list of slices and satisfy
    ``seq[k] == seq[k % period]``. Aperiodic sequences wrap an arbitrary
    callable and cannot be serialized.
    """

    def __init__(
        self,
        n_agents: int,
        schedule: Callable[[int], Digraph] | Sequence[Digraph],
        claimed_B0: int = 1,
        period: int | None = None,
    ):
        if claimed_B0 < 1:
            raise ValueError("claimed_B0 must be >= 1")
        self.n_agents = int(n_agents)
        self.claimed_B0 = int(claimed_B0)
        if callable(schedule):
            self._slices = None
            self._fn = schedule
            self.period = period
        else:
            slices = tuple(schedule)
            if not slices:
                raise ValueError("a periodic sequence needs at least one slice")
            for g in slices:
                if g.n_agents != self.n_agents:
                    raise ValueError(
                        f"slice has {g.n_agents} agents, sequence has {self.n_agents}"
                    )
            if period is not None and period != len(slices):
                raise ValueError("period must equal the number of slices")
            self._slices = slices
            self._fn = None
            self.period = len(slices)

    @property
    def slices(self) -> tuple[Digraph, ...] | None:
        return self._slices

    def __getitem__(self, k: int) -> Digraph:
        if k < 0:
            raise IndexError("graph sequences start at k = 0")
        if self._slices is not None:
            return self._slices[k % self.period]
        if self.period is not None:
            k = k % self.period
        g = self._fn(k)
        if g.n_agents != self.n_agents:
            raise ValueError(f"schedule({k}) has {g.n_agents} agents, expected {self.n_agents}")
        return g

    def __repr__(self):
        return (
            f"GraphSequence(n_agents={self.n_agents}, claimed_B0={self.claimed_B0}, "
            f"period={self.period})"
        )


def union_graph(seq: GraphSequence, k: int, B0: int) -> Digraph:
    """Union of the edge sets of ``seq`` over ``s = k*B0, ..., (k+1)*B0 - 1``."""
    if k < 0 or B0 < 1:
        raise ValueError("need k >= 0 and B0 >= 1")
    edges: set[tuple[int, int]] = set()
    for s in range(k * B0, (k + 1) * B0):
        edges |= seq[s].edges
    return Digraph(seq.n_agents, frozenset(edges))


def _reachable(adj_out: list[list[int]], start: int) -> set[int]:
    seen = {start}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in adj_out[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return seen


def is_strongly_connected(g: Digraph) -> bool:
    """Whether every agent reaches every other agent along directed edges."""
    n = g.n_agents
    fwd: list[list[int]] = [[] for _ in range(n + 1)]
    bwd: list[list[int]] = [[] for _ in range(n + 1)]
    for j, i in g.edges:
        fwd[j].append(i)
        bwd[i].append(j)
    # strongly connected iff agent 1 reaches all and all reach agent 1
    return len(_reachable(fwd, 1)) == n and len(_reachable(bwd, 1)) == n


def _window_count(seq: GraphSequence, B0: int, horizon: int) -> int:
    # windows k with (k+1)*B0 - 1 < horizon
    return horizon // B0


def b0_connectivity_report(seq: GraphSequence, B0: int, horizon: int) -> dict:
    """Check every ``B0`` window inside ``[0, horizon)``.

    For periodic sequences the distinct windows repeat with period
    ``lcm(period, B0) / B0``; when the horizon covers them all the check is
    exact, otherwise it is labelled a finite-horizon verification.
    """
    if B0 < 1 or horizon < B0:
        raise ValueError("need B0 >= 1 and horizon >= B0")
    n_windows = _window_count(seq, B0, horizon)
    failing = [k for k in range(n_windows) if not is_strongly_connected(union_graph(seq, k, B0))]
    if seq.period is not None:
        distinct = math.lcm(seq.period, B0) // B0
        mode = "exact" if n_windows >= distinct else "finite-horizon verified"
    else:
        mode = "finite-horizon verified"
    return {
        "B0": B0,
        "horizon": horizon,
        "windows_checked": n_windows,
        "failing_windows": failing,
        "connected": not failing,
        "mode": mode,
    }


def verify_b0_connectivity(seq: GraphSequence, B0: int, horizon: int) -> bool:
    return b0_connectivity_report(seq, B0, horizon)["connected"]


def make_ring(n: int) -> GraphSequence:
    """Static directed cycle ``1 -> 2 -> ... -> n -> 1``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    edges = frozenset((j, j % n + 1) for j in range(1, n + 1)) if n > 1 else frozenset()
    return GraphSequence(n, [Digraph(n, edges)], claimed_B0=1)


def make_periodic_partition(n: int, B0: int, seed: int = 0) -> GraphSequence:
    """Split a random Hamiltonian cycle over ``n`` agents into ``B0`` slices.

    Every window of ``B0`` consecutive slices recovers the whole cycle, while
    for ``B0 >= 2`` no single slice is strongly connected (each misses at least
    one cycle edge).
    """
    if n < 1 or B0 < 1:
        raise ValueError("need n >= 1 and B0 >= 1")
    rng = np.random.default_rng(seed)
    order = [int(v) + 1 for v in rng.permutation(n)]
    cycle = [(order[t], order[(t + 1) % n]) for t in range(n)] if n > 1 else []
    perm = rng.permutation(len(cycle))
    slices: list[set[tuple[int, int]]] = [set() for _ in range(B0)]
    for pos, idx in enumerate(perm):
        slices[pos % B0].add(cycle[idx])
    seq = GraphSequence(n, [Digraph(n, frozenset(s)) for s in slices], claimed_B0=B0)
    assert verify_b0_connectivity(seq, B0, B0 * seq.period)
    return seq


def make_random_sequence(
    n: int,
    edge_probability: float,
    B0_retry_budget: int = 100,
    seed: int = 0,
    B0: int = 2,
    n_windows: int = 2,
) -> GraphSequence:
    """Periodic sequence of independent Erdos-Renyi digraphs.

    The period is ``B0 * n_windows`` slices. Each window of ``B0`` slices is
    redrawn until its union is strongly connected; every redraw consumes one
    unit of ``B0_retry_budget``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 < edge_probability <= 1.0:
        raise ValueError("edge_probability must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    pairs = [(j, i) for j in range(1, n + 1) for i in range(1, n + 1) if i != j]
    budget = B0_retry_budget
    slices: list[Digraph] = []
    for w in range(n_windows):
        while True:
            window = []
            for _ in range(B0):
                keep = rng.random(len(pairs)) < edge_probability
                window.append(Digraph(n, frozenset(p for p, kp in zip(pairs, keep) if kp)))
            union = Digraph(n, frozenset().union(*(g.edges for g in window)))
            if is_strongly_connected(union):
                break
            if budget <= 0:
                raise GraphGenerationError(
                    f"retry budget of {B0_retry_budget} exhausted while drawing window {w} "
                    f"(n={n}, p={edge_probability}, B0={B0}); raise the edge probability or budget"
                )
            budget -= 1
        slices.extend(window)
    return GraphSequence(n, slices, claimed_B0=B0)


def sequence_to_dict(seq: GraphSequence) -> dict:
    if seq.slices is None:
        raise ValueError("only periodic (slice-backed) sequences can be serialized")
    return {
        "n_agents": seq.n_agents,
        "claimed_B0": seq.claimed_B0,
        "period": seq.period,
        "slices": [[list(e) for e in g.sorted_edges()] for g in seq.slices],
    }


def sequence_from_dict(doc: dict) -> GraphSequence:
    expected = {"n_agents", "claimed_B0", "period", "slices"}
    unknown = set(doc) - expected
    if unknown:
        raise ValueError(f"unknown graph-sequence keys: {sorted(unknown)}")
    missing = expected - set(doc)
    if missing:
        raise ValueError(f"missing graph-sequence keys: {sorted(missing)}")
    n = int(doc["n_agents"])
    slices = [Digraph.from_edges(n, (tuple(e) for e in s)) for s in doc["slices"]]
    if int(doc["period"]) != len(slices):
        raise ValueError(f"period {doc['period']} does not match {len(slices)} slices")
    return GraphSequence(n, slices, claimed_B0=int(doc["claimed_B0"]))


def dump_sequence(seq: GraphSequence) -> str:
    return json.dumps(sequence_to_dict(seq), sort_keys=True, indent=2)


def load_sequence(text: str) -> GraphSequence:
    return sequence_from_dict(json.loads(text))
