"""Deterministic event-driven packet dynamics on a metric graph.

A packet is (edge, direction, exact departure time). At each exact event
time, all packets arriving at a vertex are scattered as one batch into
every directed edge pointing away from it (reflection plus transmission),
so simultaneous arrivals merge by construction and the logged departure
records are unique in (time, edge, direction).

Internally all event times are integer vectors over the declared basis,
scaled by the common denominator of the input rationals, so merging and
ordering of commensurable times is exact; the basis witnesses only break
ties between declared-independent symbols.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .errors import (
    AmbiguousOrderingError,
    GraphError,
    QueryHorizonError,
    SimulationError,
)
from .graph import END_A, END_B, MetricGraph
from .timealg import DEFAULT_EPSILON, EventTime

DEFAULT_MAX_RECORDS = 10**8


@dataclass(frozen=True)
class InitialCondition:
    """Packet starting in the interior of an edge.

    offset is the travel time from the edge's 'a' endpoint to the start
    point (strictly inside the edge); toward names the endpoint the packet
    moves toward, either a vertex id or an end label ('a'/'b' or
    END_A/END_B, required for self-loops). With emit_both_directions a
    second packet starts at the same point moving the other way.
    """

    edge: str
    offset: EventTime
    toward: Union[str, int]
    emit_both_directions: bool = False


def resolve_direction(g: MetricGraph, edge_id: str, toward: Union[str, int]) -> int:
    """Normalize a direction spec to END_A / END_B."""
    e = g.edge(edge_id)
    if toward in (END_A, END_B):
        return int(toward)
    if toward in ("a", "A"):
        return END_A
    if toward in ("b", "B"):
        return END_B
    if e.is_loop():
        raise SimulationError(
            f"edge {edge_id!r} is a self-loop; direction must be 'a' or 'b'"
        )
    if toward == e.a:
        return END_A
    if toward == e.b:
        return END_B
    raise SimulationError(f"{toward!r} is not an endpoint of edge {edge_id!r}")


def scatter(g: MetricGraph, vertex: str,
            incoming: Iterable[tuple[str, Union[str, int]]]) -> set[tuple[str, int]]:
    """Outgoing directed edges for a batch of packets arriving at a vertex.

    Every arriving packet yields deg(vertex) outgoing packets, one per
    directed edge away from the vertex (one reflected, the rest
    transmitted); the union over arrivals is returned, so simultaneous
    arrivals merge.
    """
    incoming = list(incoming)
    if not incoming:
        raise SimulationError("scatter requires at least one incoming packet")
    for edge_id, toward in incoming:
        d = resolve_direction(g, edge_id, toward)
        if g.edge(edge_id).vertex_at(d) != vertex:
            raise SimulationError(
                f"incoming packet on {edge_id!r} toward end {d} does not "
                f"arrive at vertex {vertex!r}"
            )
    return {(g.edges[ei].id, d) for ei, d in g.slots(vertex)}


def scattering_matrix(m: int) -> np.ndarray:
    """Amplitude scattering matrix of a degree-m vertex.

    Diagonal (reflection) entries (2-m)/m, off-diagonal (transmission)
    entries 2/m; orthogonal for every m >= 1.
    """
    if m < 1:
        raise SimulationError("vertex degree must be >= 1")
    s = np.full((m, m), 2.0 / m)
    np.fill_diagonal(s, (2.0 - m) / m)
    return s


# -- engine setup -----------------------------------------------------------------


def _lcm(a: int, b: int) -> int:
    return a * b // math.gcd(a, b)


def _common_scale(times: Iterable[EventTime]) -> int:
    scale = 1
    for t in times:
        for q in t.coeffs.values():
            scale = _lcm(scale, q.denominator)
    return scale


def _scaled_vec(t: EventTime, scale: int, rank: int) -> tuple[int, ...]:
    row = [0] * rank
    for name, q in t.coeffs.items():
        row[t.basis.index(name)] = int(q * scale)
    return tuple(row)


def _canonical_witness(vec: Sequence[int], wits: Sequence[float]) -> float:
    # Single shared accumulation order: identical floats in both engines.
    w = 0.0
    for k in range(len(vec)):
        w += vec[k] * wits[k]
    return w


@dataclass(frozen=True)
class _InitialPacket:
    edge_idx: int
    toward: int
    offset: EventTime     # position of the start point from end a
    arrival: EventTime    # time the packet first reaches a vertex
    amp: float


def simulate(g: MetricGraph, init: InitialCondition, horizon: EventTime, *,
             epsilon: float = DEFAULT_EPSILON,
             max_records: int = DEFAULT_MAX_RECORDS,
             track_amplitudes: bool = False,
             engine: Optional[str] = None) -> "EventLog":
    """Run the packet dynamics up to the exact horizon time.

    Returns the complete, deterministic log of departure records with
    time <= horizon. Raises AmbiguousOrderingError if two distinct exact
    event times cannot be separated at witness precision, and
    ResourceLimitError past max_records.
    """
    from .engine import run_engine

    ei = g.edge_index(init.edge)
    e = g.edges[ei]
    if init.offset.basis != g.basis or horizon.basis != g.basis:
        raise SimulationError("offset and horizon must use the graph basis")
    zero = g.basis.zero()
    if not (init.offset.compare(zero, epsilon) > 0
            and init.offset.compare(e.time, epsilon) < 0):
        raise SimulationError(
            "offset must lie strictly inside the edge travel time"
        )
    if horizon.compare(zero, epsilon) <= 0:
        raise SimulationError("horizon must be positive")
    if epsilon <= 0:
        raise SimulationError("epsilon must be positive")
    if max_records < 1:
        raise SimulationError("max_records must be >= 1")

    d0 = resolve_direction(g, init.edge, init.toward)
    directions = [d0, 1 - d0] if init.emit_both_directions else [d0]
    initial = []
    for d in directions:
        arrival = init.offset if d == END_A else e.time - init.offset
        initial.append(_InitialPacket(ei, d, init.offset, arrival, 1.0))

    rank = g.basis.rank
    scale = _common_scale(
        [t for t in g.travel_times()] + [init.offset, horizon]
    )
    wits = list(g.basis.witnesses)
    edge_vecs = [_scaled_vec(e2.time, scale, rank) for e2 in g.edges]
    seeds = []
    for p in initial:
        vec = _scaled_vec(p.arrival, scale, rank)
        seeds.append((vec, g.vertex_index(g.edges[p.edge_idx].vertex_at(p.toward)),
                      p.edge_idx, p.toward, p.amp))

    setup = {
        "K": rank,
        "symbol_wit": wits,
        "edge_vecs": edge_vecs,
        "edge_wit": [_canonical_witness(v, wits) for v in edge_vecs],
        "edge_dst": [
            (g.vertex_index(e2.a), g.vertex_index(e2.b)) for e2 in g.edges
        ],
        "adjacency": [g.slots(v) for v in g.vertices],
        "seeds": seeds,
        "horizon_vec": _scaled_vec(horizon, scale, rank),
        "epsilon": float(epsilon) * scale,
        "max_records": int(max_records),
        "track_amp": bool(track_amplitudes),
    }
    setup["horizon_wit"] = _canonical_witness(setup["horizon_vec"], wits)

    result, engine_name = run_engine(setup, engine)
    return EventLog(g, init, initial, horizon, float(epsilon), scale,
                    result, engine_name)


# -- event log and count queries ---------------------------------------------------


class EventLog:
    """Immutable departure history of one simulation run.

    Records are stored in exact time order as parallel numpy arrays;
    `times_int[i] / scale` is the exact coefficient vector of record i
    over the graph basis. All count queries are exact: comparisons fall
    back to the canonical vectors whenever witness values come within
    epsilon of the query time.
    """

    def __init__(self, graph: MetricGraph, init: InitialCondition,
                 initial_packets: list[_InitialPacket], horizon: EventTime,
                 epsilon: float, scale: int, arrays: dict, engine_name: str):
        self.graph = graph
        self.init = init
        self.initial_packets = initial_packets
        self.horizon = horizon
        self.epsilon = epsilon
        self.scale = scale
        self.engine = engine_name
        self.times_int = arrays["times"]
        self.wit = arrays["wit"] / scale
        self.vertex = arrays["vertex"]
        self.edge = arrays["edge"]
        self.toward = arrays["toward"]
        self.amp = arrays.get("amp")
        for a in (self.times_int, self.wit, self.vertex, self.edge, self.toward):
            a.setflags(write=False)
        if self.amp is not None:
            self.amp.setflags(write=False)
        # group caches hold (global indices, their witness values), both
        # time-sorted; the witness copy is made once per group
        self._edge_groups: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self._dir_groups: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}
        self._dep_groups: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}

    def __len__(self) -> int:
        return len(self.wit)

    @property
    def n_records(self) -> int:
        return len(self.wit)

    @property
    def reliable_horizon(self) -> EventTime:
        """Latest query time with all in-flight packets guaranteed logged."""
        longest = max(self.graph.edges, key=lambda e: e.time.witness)
        return self.horizon - longest.time

    def record_time(self, i: int) -> EventTime:
        basis = self.graph.basis
        row = self.times_int[i]
        return basis.time({
            basis.names[k]: Fraction(int(row[k]), self.scale)
            for k in range(basis.rank) if row[k]
        })

    def record(self, i: int) -> dict:
        e = self.graph.edges[int(self.edge[i])]
        out = {
            "t_real": float(self.wit[i]),
            "t_exact": self.record_time(i).to_json(),
            "vertex": self.graph.vertices[int(self.vertex[i])],
            "edge": e.id,
            "dir": "a" if int(self.toward[i]) == END_A else "b",
        }
        if self.amp is not None:
            out["amp"] = float(self.amp[i])
        return out

    # -- exact boundary comparison helpers ------------------------------------

    def _compare_loose(self, a: EventTime, b: EventTime) -> int:
        """Best-effort exact comparison for count queries.

        Exact whenever decidable (identical vectors, or a difference on a
        single symbol); a multi-symbol difference below epsilon falls back
        to the witness sign (ties broken on the coefficient vectors), so
        measurements at such times are deterministic rather than fatal.
        Equality, which the counting conventions hinge on, stays exact.
        """
        try:
            return a.compare(b, self.epsilon)
        except AmbiguousOrderingError:
            if a.witness != b.witness:
                return -1 if a.witness < b.witness else 1
            ca, cb = sorted(a.coeffs.items()), sorted(b.coeffs.items())
            return -1 if ca < cb else 1

    def _count_boundary(self, group: tuple[np.ndarray, np.ndarray],
                        t: EventTime, strict: bool) -> int:
        """Count records in a time-sorted group <= t (< t when strict)."""
        idx, w = group
        if len(idx) == 0:
            return 0
        wt = t.witness
        lo = int(np.searchsorted(w, wt - self.epsilon, side="left"))
        hi = int(np.searchsorted(w, wt + self.epsilon, side="right"))
        n = lo
        for j in range(lo, hi):
            c = self._compare_loose(self.record_time(int(idx[j])), t)
            if c < 0 or (c == 0 and not strict):
                n += 1
        return n

    def _le(self, group, t: EventTime) -> int:
        return self._count_boundary(group, t, strict=False)

    def _lt(self, group, t: EventTime) -> int:
        return self._count_boundary(group, t, strict=True)

    def _arr_le(self, edge_idx: int, t: EventTime) -> int:
        """Records on an edge whose arrival time is <= t."""
        tau = self.graph.edges[edge_idx].time
        return self._le(self._edge_group(edge_idx), t - tau)

    def _make_group(self, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        idx = np.flatnonzero(mask)
        return idx, self.wit[idx]

    def _edge_group(self, edge_idx: int) -> tuple[np.ndarray, np.ndarray]:
        if edge_idx not in self._edge_groups:
            self._edge_groups[edge_idx] = self._make_group(self.edge == edge_idx)
        return self._edge_groups[edge_idx]

    def _dir_group(self, edge_idx: int, toward: int) -> tuple[np.ndarray, np.ndarray]:
        key = (edge_idx, toward)
        if key not in self._dir_groups:
            self._dir_groups[key] = self._make_group(
                (self.edge == edge_idx) & (self.toward == toward)
            )
        return self._dir_groups[key]

    def _dep_group(self, vertex_idx: int, edge_idx: int) -> tuple[np.ndarray, np.ndarray]:
        key = (vertex_idx, edge_idx)
        if key not in self._dep_groups:
            self._dep_groups[key] = self._make_group(
                (self.vertex == vertex_idx) & (self.edge == edge_idx)
            )
        return self._dep_groups[key]

    def _check_query_time(self, t: EventTime, bound: EventTime) -> None:
        if t.basis != self.graph.basis:
            raise SimulationError("query time must use the graph basis")
        if self._compare_loose(t, self.graph.basis.zero()) < 0:
            raise QueryHorizonError("query time must be nonnegative")
        if self._compare_loose(t, bound) > 0:
            raise QueryHorizonError(
                f"query at {t.witness:g} beyond reliable horizon "
                f"{bound.witness:g}"
            )

    def _initial_inflight(self, t: EventTime) -> list[_InitialPacket]:
        out = []
        for p in self.initial_packets:
            if self._compare_loose(t, p.arrival) < 0:
                out.append(p)
        return out

    # -- public queries ---------------------------------------------------------

    def packet_count(self, t: EventTime, merge_crossings: bool = False) -> int:
        """Packets in flight at time t.

        Packets created exactly at t are counted, packets arriving exactly
        at t are not. With merge_crossings, opposite-direction packets
        momentarily at the same interior point count once.
        """
        self._check_query_time(t, self.reliable_horizon)
        if merge_crossings:
            return sum(
                self.edge_count(e.id, t, merge_crossings=True)
                for e in self.graph.edges
            )
        total = len(self._initial_inflight(t))
        for ei in range(self.graph.n_edges):
            total += self._le(self._edge_group(ei), t) - self._arr_le(ei, t)
        return total

    def edge_count(self, edge_id: str, t: EventTime,
                   merge_crossings: bool = False) -> int:
        """Packets in flight on one edge at time t."""
        ei = self.graph.edge_index(edge_id)
        self._check_query_time(t, self.reliable_horizon)
        if merge_crossings:
            return len(self._occupied_positions(ei, t))
        n = self._le(self._edge_group(ei), t) - self._arr_le(ei, t)
        n += sum(1 for p in self._initial_inflight(t) if p.edge_idx == ei)
        return n

    def _occupied_positions(self, ei: int, t: EventTime) -> set[EventTime]:
        """Distinct exact positions (travel time from end a) occupied at t."""
        tau = self.graph.edges[ei].time
        positions: set[EventTime] = set()
        for d in (END_A, END_B):
            idx, w = self._dir_group(ei, d)
            lo = int(np.searchsorted(w, t.witness - tau.witness - self.epsilon,
                                     side="left"))
            for j in range(lo, len(idx)):
                i = int(idx[j])
                dep = self.record_time(i)
                if self._compare_loose(dep, t) > 0:
                    break
                arr = dep + tau
                if self._compare_loose(arr, t) <= 0:
                    continue
                pos = (t - dep) if d == END_B else (tau - (t - dep))
                positions.add(pos)
        for p in self._initial_inflight(t):
            if p.edge_idx == ei:
                pos = (p.offset + t) if p.toward == END_B else (p.offset - t)
                positions.add(pos)
        return positions

    def departure_count(self, vertex: str, edge_id: str, t: EventTime) -> int:
        """Departure records from a vertex onto an edge with time <= t."""
        vi = self.graph.vertex_index(vertex)
        ei = self.graph.edge_index(edge_id)
        if not any(s[0] == ei for s in self.graph.slots(vertex)):
            raise GraphError(f"edge {edge_id!r} is not adjacent to {vertex!r}")
        self._check_query_time(t, self.horizon)
        return self._le(self._dep_group(vi, ei), t)

    def segment_count(self, edge_id: str, from_offset: EventTime,
                      tau: EventTime, t: EventTime) -> int:
        """Packets whose position at t lies in [from_offset, from_offset+tau].

        Positions are travel times from the edge's 'a' endpoint; both
        segment endpoints are inclusive, but a packet arriving at a vertex
        exactly at t is no longer on the edge.
        """
        ei = self.graph.edge_index(edge_id)
        edge_tau = self.graph.edges[ei].time
        zero = self.graph.basis.zero()
        if (self._compare_loose(from_offset, zero) < 0
                or self._compare_loose(tau, zero) < 0):
            raise SimulationError("segment must have nonnegative offset and length")
        seg_end = from_offset + tau
        if self._compare_loose(seg_end, edge_tau) > 0:
            raise SimulationError("segment extends past the edge")
        self._check_query_time(t, self.reliable_horizon)

        total = 0
        # moving toward end b: position = t - dep
        upper = t - from_offset
        lower = upper - tau
        idx = self._dir_group(ei, END_B)
        at_end = seg_end == edge_tau
        total += self._le(idx, upper) - (self._le(idx, lower) if at_end
                                         else self._lt(idx, lower))
        # moving toward end a: position = edge_tau - (t - dep)
        lower = t - edge_tau + from_offset
        upper = lower + tau
        idx = self._dir_group(ei, END_A)
        at_start = from_offset == zero
        total += self._le(idx, upper) - (self._le(idx, lower) if at_start
                                         else self._lt(idx, lower))
        for p in self._initial_inflight(t):
            if p.edge_idx != ei:
                continue
            pos = (p.offset + t) if p.toward == END_B else (p.offset - t)
            if (self._compare_loose(pos, from_offset) >= 0
                    and self._compare_loose(pos, seg_end) <= 0):
                total += 1
        return total

    def segment_count_by_departures(self, edge_id: str, from_offset: EventTime,
                                    tau: EventTime, t: EventTime) -> int:
        """Segment count via arrival differences at the segment endpoints.

        Independent of segment_count's direct position test: counts, for
        each end of the edge, departures into the edge over the window of
        length tau ending when the packet front passes the far segment
        endpoint. Equals segment_count at query times where no packet sits
        exactly on a segment endpoint.
        """
        ei = self.graph.edge_index(edge_id)
        edge_tau = self.graph.edges[ei].time
        self._check_query_time(t, self.reliable_horizon)
        seg_end = from_offset + tau
        idx_b = self._dir_group(ei, END_B)
        n = self._le(idx_b, t - from_offset) - self._le(idx_b, t - seg_end)
        idx_a = self._dir_group(ei, END_A)
        n += (self._le(idx_a, t - (edge_tau - seg_end))
              - self._le(idx_a, t - (edge_tau - from_offset)))
        for p in self._initial_inflight(t):
            if p.edge_idx != ei:
                continue
            pos = (p.offset + t) if p.toward == END_B else (p.offset - t)
            if (self._compare_loose(pos, from_offset) >= 0
                    and self._compare_loose(pos, seg_end) <= 0):
                n += 1
        return n

    def departure_instants(self, vertex: str,
                           edge_id: Optional[str] = None) -> list[EventTime]:
        """Distinct exact departure times from a vertex, sorted."""
        vi = self.graph.vertex_index(vertex)
        mask = self.vertex == vi
        if edge_id is not None:
            mask &= self.edge == self.graph.edge_index(edge_id)
        rows = self.times_int[np.flatnonzero(mask)]
        uniq = np.unique(rows, axis=0) if len(rows) else rows
        basis = self.graph.basis
        out = [
            basis.time({
                basis.names[k]: Fraction(int(row[k]), self.scale)
                for k in range(basis.rank) if row[k]
            })
            for row in uniq
        ]
        out.sort(key=lambda x: x.witness)
        return out

    def count_series(self, sample_times: Sequence[EventTime],
                     dep_pairs: Sequence[tuple[str, str]] = ()) -> "CountSeries":
        """Sampled counts: N(t), per-edge counts, departure counts per pair."""
        for t1, t2 in zip(sample_times, sample_times[1:]):
            if self._compare_loose(t1, t2) > 0:
                raise SimulationError("sample times must be sorted ascending")
        for v, e in dep_pairs:
            self.graph.vertex_index(v)
            self.graph.edge_index(e)
        edge_ids = [e.id for e in self.graph.edges]
        rows = []
        for t in sample_times:
            n = self.packet_count(t)
            per_edge = [self.edge_count(e, t) for e in edge_ids]
            deps = [self.departure_count(v, e, t) for v, e in dep_pairs]
            rows.append((t.witness, t, n, per_edge, deps))
        return CountSeries(edge_ids, list(dep_pairs), rows)

    def to_jsonl(self, path: str) -> None:
        """One departure record per line; initial packets first, vertex null."""
        with open(path, "w", encoding="utf-8") as fh:
            for p in self.initial_packets:
                entry = {
                    "t_real": 0.0,
                    "t_exact": {},
                    "vertex": None,
                    "edge": self.graph.edges[p.edge_idx].id,
                    "dir": "a" if p.toward == END_A else "b",
                }
                if self.amp is not None:
                    entry["amp"] = p.amp
                fh.write(json.dumps(entry, sort_keys=True) + "\n")
            for i in range(len(self)):
                fh.write(json.dumps(self.record(i), sort_keys=True) + "\n")


@dataclass
class CountSeries:
    """Sampled count table; rows are (t, t_exact, N, per-edge, per-pair)."""

    edge_ids: list[str]
    dep_pairs: list[tuple[str, str]]
    rows: list[tuple[float, Optional[EventTime], int, list[int], list[int]]]

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def t(self) -> np.ndarray:
        return np.array([r[0] for r in self.rows], dtype=float)

    @property
    def n(self) -> np.ndarray:
        return np.array([r[2] for r in self.rows], dtype=float)

    def edge_counts(self, edge_id: str) -> np.ndarray:
        j = self.edge_ids.index(edge_id)
        return np.array([r[3][j] for r in self.rows], dtype=float)

    def departure_counts(self, vertex: str, edge_id: str) -> np.ndarray:
        j = self.dep_pairs.index((vertex, edge_id))
        return np.array([r[4][j] for r in self.rows], dtype=float)

    def header(self) -> list[str]:
        cols = ["t", "N"]
        cols += [f"N_e_{e}" for e in self.edge_ids]
        cols += [f"N_dep_{v}_{e}" for v, e in self.dep_pairs]
        return cols

    def to_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(self.header()) + "\n")
            for t, _te, n, per_edge, deps in self.rows:
                cells = [format(t, ".17g"), str(n)]
                cells += [str(x) for x in per_edge]
                cells += [str(x) for x in deps]
                fh.write(",".join(cells) + "\n")

    @classmethod
    def from_csv(cls, path: str) -> "CountSeries":
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
            if header[:2] != ["t", "N"]:
                raise SimulationError(f"unexpected series header {header[:2]}")
            edge_ids = [c[4:] for c in header if c.startswith("N_e_")]
            dep_pairs = []
            for c in header:
                if c.startswith("N_dep_"):
                    v, e = c[6:].split("_", 1)
                    dep_pairs.append((v, e))
            rows = []
            for line in fh:
                if not line.strip():
                    continue
                cells = line.strip().split(",")
                t = float(cells[0])
                n = int(cells[1])
                ne = [int(x) for x in cells[2:2 + len(edge_ids)]]
                nd = [int(x) for x in cells[2 + len(edge_ids):]]
                rows.append((t, None, n, ne, nd))
        return cls(edge_ids, dep_pairs, rows)
