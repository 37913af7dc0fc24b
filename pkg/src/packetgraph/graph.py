"""Metric-graph model, GF(2) cycle algebra and edge codes.

Edges carry exact travel times (EventTime). Directions on an edge are
named by the end a packet moves toward (END_A / END_B), which keeps
self-loops and parallel edges unambiguous. The cycle space is handled as
int bitmasks over edge positions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .errors import GraphError, PacketGraphError
from .timealg import EventTime, TimeBasis

END_A = 0
END_B = 1


class TurningPointError(PacketGraphError):
    """Quadrature energy does not exceed the potential everywhere."""


@dataclass(frozen=True)
class Edge:
    id: str
    a: str
    b: str
    time: EventTime

    def other_end(self, end: int) -> int:
        return 1 - end

    def vertex_at(self, end: int) -> str:
        return self.a if end == END_A else self.b

    def is_loop(self) -> bool:
        return self.a == self.b


class MetricGraph:
    """Validated connected metric graph with derived adjacency.

    Immutable after construction. `slots(v)` lists the directed edges
    pointing away from v as (edge index, end moved toward) pairs, in edge
    declaration order; its length is the degree of v (a self-loop
    contributes two slots).
    """

    def __init__(self, vertices: Sequence[str], edges: Sequence[Edge],
                 basis: TimeBasis):
        self.vertices = tuple(vertices)
        self.edges = tuple(edges)
        self.basis = basis
        self.warnings: list[str] = []
        self._vertex_index = {v: i for i, v in enumerate(self.vertices)}
        self._edge_index = {e.id: i for i, e in enumerate(self.edges)}
        for e in self.edges:
            for v in (e.a, e.b):
                if v not in self._vertex_index:
                    raise GraphError(f"edge {e.id!r} endpoint {v!r} is not a vertex")
        slots: dict[str, list[tuple[int, int]]] = {v: [] for v in self.vertices}
        for i, e in enumerate(self.edges):
            slots[e.a].append((i, END_B))
            slots[e.b].append((i, END_A))
        self._slots = {v: tuple(s) for v, s in slots.items()}
        self._validate()

    # -- construction helpers -------------------------------------------------

    def _validate(self) -> None:
        if not self.vertices:
            raise GraphError("graph has no vertices")
        if len(set(self.vertices)) != len(self.vertices):
            raise GraphError("duplicate vertex id")
        if len(self._edge_index) != len(self.edges):
            raise GraphError("duplicate edge id")
        for e in self.edges:
            if e.time.basis != self.basis:
                raise GraphError(f"edge {e.id!r} travel time uses a different basis")
            if not e.time.witness > 0.0:
                raise GraphError(f"edge {e.id!r} travel time must be positive")
        if not self._connected():
            raise GraphError("graph is disconnected")
        for v in self.vertices:
            if self.degree(v) == 2:
                self.warnings.append(
                    f"vertex {v!r} has degree 2; asymptotic predictors exclude it"
                )

    def _connected(self) -> bool:
        if len(self.vertices) == 1:
            return True
        seen = {self.vertices[0]}
        stack = [self.vertices[0]]
        while stack:
            v = stack.pop()
            for ei, toward in self._slots[v]:
                w = self.edges[ei].vertex_at(toward)
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == len(self.vertices)

    # -- queries ---------------------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def vertex_index(self, v: str) -> int:
        try:
            return self._vertex_index[v]
        except KeyError:
            raise GraphError(f"unknown vertex {v!r}") from None

    def edge_index(self, edge_id: str) -> int:
        try:
            return self._edge_index[edge_id]
        except KeyError:
            raise GraphError(f"unknown edge {edge_id!r}") from None

    def edge(self, edge_id: str) -> Edge:
        return self.edges[self.edge_index(edge_id)]

    def slots(self, v: str) -> tuple[tuple[int, int], ...]:
        if v not in self._slots:
            raise GraphError(f"unknown vertex {v!r}")
        return self._slots[v]

    def degree(self, v: str) -> int:
        return len(self.slots(v))

    def travel_times(self) -> list[EventTime]:
        return [e.time for e in self.edges]

    def max_travel_witness(self) -> float:
        return max(e.time.witness for e in self.edges)

    # -- serialization -----------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "basis": self.basis.to_json(),
            "vertices": list(self.vertices),
            "edges": [
                {"id": e.id, "from": e.a, "to": e.b, "time": e.time.to_json()}
                for e in self.edges
            ],
        }


def build_graph(vertices: Sequence[str],
                edges: Iterable[tuple[str, str, str, EventTime]],
                basis: TimeBasis) -> MetricGraph:
    """Graph from (edge id, endpoint, endpoint, travel time) tuples."""
    built = [Edge(eid, a, b, t) for eid, a, b, t in edges]
    return MetricGraph(vertices, built, basis)


def load_graph(data: Mapping | str) -> MetricGraph:
    """Parse the JSON graph format; unknown fields are rejected."""
    if isinstance(data, str):
        with open(data, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    extra = set(data) - {"basis", "vertices", "edges"}
    if extra:
        raise GraphError(f"unknown graph field(s) {sorted(extra)}")
    for key in ("basis", "vertices", "edges"):
        if key not in data:
            raise GraphError(f"graph file is missing {key!r}")
    basis = TimeBasis.from_json(data["basis"])
    edges = []
    for entry in data["edges"]:
        bad = set(entry) - {"id", "from", "to", "time"}
        if bad:
            raise GraphError(f"unknown edge field(s) {sorted(bad)}")
        try:
            time = EventTime.from_json(basis, entry["time"])
        except (KeyError, ValueError, ZeroDivisionError) as exc:
            raise GraphError(f"edge {entry.get('id')!r}: bad time ({exc})") from exc
        edges.append((str(entry["id"]), str(entry["from"]), str(entry["to"]), time))
    return build_graph([str(v) for v in data["vertices"]], edges, basis)


def dump_graph(g: MetricGraph, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(g.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- cycle space ----------------------------------------------------------------


@dataclass(frozen=True)
class CycleData:
    """Spanning tree, co-tree and fundamental-cycle basis of a graph."""

    spanning_tree: frozenset[str]
    cross_edges: tuple[str, ...]
    beta: int
    fundamental_cycles: tuple[int, ...]  # bitmasks over edge positions


@dataclass(frozen=True)
class Code:
    """GF(2) parity vector over edges (edge declaration order)."""

    parities: tuple[int, ...]

    @property
    def bits(self) -> int:
        mask = 0
        for i, p in enumerate(self.parities):
            if p:
                mask |= 1 << i
        return mask


def _bfs_tree(g: MetricGraph) -> tuple[dict[str, tuple[str, int]], list[int]]:
    """Deterministic BFS tree from the lexicographically smallest vertex.

    Returns parent links {vertex: (parent vertex, edge index)} and the
    tree-edge index list.
    """
    root = min(g.vertices)
    parent: dict[str, tuple[str, int]] = {}
    seen = {root}
    queue = [root]
    tree_edges: list[int] = []
    while queue:
        v = queue.pop(0)
        for ei, toward in g.slots(v):
            w = g.edges[ei].vertex_at(toward)
            if w not in seen:
                seen.add(w)
                parent[w] = (v, ei)
                tree_edges.append(ei)
                queue.append(w)
    return parent, tree_edges


def _tree_path_mask(g: MetricGraph, parent: dict[str, tuple[str, int]],
                    a: str, b: str) -> int:
    """Bitmask of tree edges on the unique tree path between a and b."""
    root = min(g.vertices)

    def path_to_root(v: str) -> int:
        mask = 0
        while v != root:
            v, ei = parent[v]
            mask ^= 1 << ei
        return mask

    return path_to_root(a) ^ path_to_root(b)


def cycle_rank(g: MetricGraph) -> CycleData:
    """Spanning tree, cross edges and the fundamental-cycle GF(2) basis."""
    parent, tree_edges = _bfs_tree(g)
    tree_set = set(tree_edges)
    cross = [i for i in range(g.n_edges) if i not in tree_set]
    cycles = []
    for ci in cross:
        e = g.edges[ci]
        cycles.append((1 << ci) ^ _tree_path_mask(g, parent, e.a, e.b))
    beta = len(cross)
    assert beta == g.n_edges - g.n_vertices + 1
    return CycleData(
        spanning_tree=frozenset(g.edges[i].id for i in tree_edges),
        cross_edges=tuple(g.edges[i].id for i in cross),
        beta=beta,
        fundamental_cycles=tuple(cycles),
    )


def chain_boundary(g: MetricGraph, mask: int) -> frozenset[str]:
    """Vertices with odd incidence in the GF(2) chain given by mask."""
    odd: set[str] = set()
    for i in range(g.n_edges):
        if (mask >> i) & 1:
            e = g.edges[i]
            if e.is_loop():
                continue
            odd ^= {e.a, e.b}
    return frozenset(odd)


def codes(g: MetricGraph, a: str, b: str) -> list[Code]:
    """All 2^beta GF(2) chains whose boundary is {a, b} ({} when a == b).

    Parametrized by the parity assignment on cross edges; tree-edge
    parities are then forced. Returned in cross-bit binary order.
    """
    g.vertex_index(a)
    g.vertex_index(b)
    parent, _ = _bfs_tree(g)
    data = cycle_rank(g)
    base = 0 if a == b else _tree_path_mask(g, parent, a, b)
    out = []
    for bits in range(1 << data.beta):
        mask = base
        for j in range(data.beta):
            if (bits >> j) & 1:
                mask ^= data.fundamental_cycles[j]
        out.append(Code(tuple((mask >> i) & 1 for i in range(g.n_edges))))
    return out


def _cycle_weight_parity(cycle_mask: int, weights: Sequence[int]) -> int:
    p = 0
    for i, n in enumerate(weights):
        if (cycle_mask >> i) & 1:
            p ^= n & 1
    return p


def even_cycle_exists(g: MetricGraph, weights: Sequence[int]) -> bool:
    """Whether some nonzero cycle-space vector has even total weight.

    With the parity functional z -> sum(weights[i] * z_i) mod 2 on the
    cycle space: false iff beta = 0, or beta = 1 with an odd fundamental
    cycle; for beta >= 2 the functional always has a nontrivial kernel.
    """
    data = _weighted_cycle_data(g, weights)
    if data.beta == 0:
        return False
    if data.beta == 1:
        return _cycle_weight_parity(data.fundamental_cycles[0], weights) == 0
    return True


def odd_cycle_exists(g: MetricGraph, weights: Sequence[int]) -> bool:
    """Whether some cycle-space vector has odd total weight.

    Equivalent to: the graph obtained by subdividing edge i into
    weights[i] unit edges is non-bipartite. Linear in the fundamental
    basis: an odd vector exists iff some fundamental cycle is odd.
    """
    data = _weighted_cycle_data(g, weights)
    return any(
        _cycle_weight_parity(c, weights) == 1 for c in data.fundamental_cycles
    )


def _weighted_cycle_data(g: MetricGraph, weights: Sequence[int]) -> CycleData:
    if len(weights) != g.n_edges:
        raise GraphError(
            f"expected {g.n_edges} edge weights, got {len(weights)}"
        )
    if any(int(n) != n or n <= 0 for n in weights):
        raise GraphError("edge weights must be positive integers")
    return cycle_rank(g)


# -- travel time from a sampled potential -----------------------------------------


def travel_time_from_potential(samples: Sequence[tuple[float, float]],
                               energy: float) -> float:
    """Quadrature of dx / sqrt(energy - Q(x)) over a sampled potential.

    Composite Simpson when the grid is uniform with an even number of
    intervals; the trailing interval (odd count) and non-uniform grids
    fall back to the trapezoid rule, which keeps second-order accuracy.
    """
    if len(samples) < 2:
        raise GraphError("need at least 2 potential samples")
    xs = [float(x) for x, _ in samples]
    qs = [float(q) for _, q in samples]
    if any(x2 <= x1 for x1, x2 in zip(xs, xs[1:])):
        raise GraphError("potential samples must be sorted with distinct positions")
    qmax = max(qs)
    if energy <= qmax:
        raise TurningPointError(
            f"energy {energy} does not exceed max potential {qmax}"
        )
    f = [1.0 / math.sqrt(energy - q) for q in qs]
    n = len(xs) - 1
    h = (xs[-1] - xs[0]) / n
    uniform = all(abs((x2 - x1) - h) <= 1e-9 * max(h, 1.0)
                  for x1, x2 in zip(xs, xs[1:]))
    total = 0.0
    i = 0
    if uniform:
        while i + 2 <= n:
            total += (h / 3.0) * (f[i] + 4.0 * f[i + 1] + f[i + 2])
            i += 2
    while i < n:
        total += 0.5 * (xs[i + 1] - xs[i]) * (f[i] + f[i + 1])
        i += 1
    return total
