import math
from fractions import Fraction

import numpy as np
import pytest

import packetgraph as pg
from packetgraph.dynamics import scattering_matrix
from packetgraph.graph import END_A, END_B

from conftest import ENGINES, halfway


def t0(basis, q):
    return basis.symbol(basis.names[0], Fraction(q))


# -- scatter -------------------------------------------------------------------------


def test_scatter_degree3_one_incoming(star_equal):
    out = pg.scatter(star_equal, "c", [("e1", "a")])
    assert out == {("e1", END_B), ("e2", END_B), ("e3", END_B)}


def test_scatter_leaf_reflects(star_equal):
    out = pg.scatter(star_equal, "l1", [("e1", "b")])
    assert out == {("e1", END_A)}


def test_scatter_two_incoming_dedupes(star_equal):
    out = pg.scatter(star_equal, "c", [("e1", "a"), ("e2", "a")])
    assert len(out) == 3


def test_scatter_not_adjacent(star_equal):
    with pytest.raises(pg.SimulationError):
        pg.scatter(star_equal, "l1", [("e2", "b")])
    with pytest.raises(pg.SimulationError):
        pg.scatter(star_equal, "c", [])


def test_scatter_self_loop(loop_pendant):
    out = pg.scatter(loop_pendant, "u", [("loop", "a")])
    assert out == {("loop", END_A), ("loop", END_B), ("pend", END_B)}


# -- simulate ------------------------------------------------------------------------


@pytest.mark.parametrize("engine", ENGINES)
def test_star_reaches_three_forever(star_equal, engine):
    b = star_equal.basis
    init = pg.InitialCondition("e1", t0(b, "1/2"), "c")
    log = pg.simulate(star_equal, init, t0(b, 20), engine=engine)
    assert log.packet_count(t0(b, "1/4")) == 1
    for k in range(2, 76):
        assert log.packet_count(t0(b, Fraction(k, 4))) == 3


@pytest.mark.parametrize("engine", ENGINES)
def test_single_edge_bounces_forever(basis1, engine):
    g = pg.build_graph(["u", "w"], [("e", "u", "w", basis1.symbol("t0"))],
                       basis1)
    init = pg.InitialCondition("e", t0(basis1, "1/2"), "w")
    log = pg.simulate(g, init, t0(basis1, 30), engine=engine)
    for k in range(0, 116):
        assert log.packet_count(t0(basis1, Fraction(k, 4))) == 1


def test_theta_112_stabilizes_at_eight(theta_112):
    b = theta_112.basis
    init = pg.InitialCondition("e1", t0(b, "1/2"), "v1")
    log = pg.simulate(theta_112, init, t0(b, 60))
    assert log.packet_count(t0(b, "225/4")) == 8
    assert log.packet_count(t0(b, 50)) == 8


def test_counting_convention_at_event_instants(basis1):
    # single edge, first vertex hit at 1/2: arrival not counted, departure is
    g = pg.build_graph(["u", "w"], [("e", "u", "w", basis1.symbol("t0"))],
                       basis1)
    init = pg.InitialCondition("e", t0(basis1, "1/2"), "w")
    log = pg.simulate(g, init, t0(basis1, 10), engine="python")
    assert log.packet_count(t0(basis1, "1/2")) == 1
    assert log.departure_count("w", "e", t0(basis1, "1/2")) == 1
    assert log.departure_count("w", "e", t0(basis1, "499/1000")) == 0


def test_initial_packet_before_first_hit(theta_indep):
    b = theta_indep.basis
    init = pg.InitialCondition("e1", b.symbol("t1", Fraction(1, 2)), "v1")
    log = pg.simulate(theta_indep, init, b.symbol("t1", 10))
    assert log.packet_count(b.symbol("t1", Fraction(1, 4))) == 1
    assert log.edge_count("e1", b.symbol("t1", Fraction(1, 4))) == 1
    assert log.edge_count("e2", b.symbol("t1", Fraction(1, 4))) == 0


def test_emit_both_directions_counts_two(theta_indep):
    b = theta_indep.basis
    init = pg.InitialCondition("e1", b.symbol("t1", Fraction(1, 3)), "v1",
                               emit_both_directions=True)
    log = pg.simulate(theta_indep, init, b.symbol("t1", 10))
    assert log.packet_count(b.symbol("t1", Fraction(1, 4))) == 2


# -- count queries --------------------------------------------------------------------


def test_partition_over_edges(theta_indep):
    b = theta_indep.basis
    init = pg.InitialCondition("e1", b.symbol("t1", Fraction(1, 2)), "v1")
    log = pg.simulate(theta_indep, init, b.symbol("t1", 30))
    for k in range(1, 28 * 3):
        t = b.symbol("t1", Fraction(k, 3))
        n = log.packet_count(t)
        parts = sum(log.edge_count(e.id, t) for e in theta_indep.edges)
        assert parts == n


def test_edge_count_star_one_per_edge(star_equal):
    b = star_equal.basis
    init = pg.InitialCondition("e1", t0(b, "1/2"), "c")
    log = pg.simulate(star_equal, init, t0(b, 20))
    t = t0(b, "65/4")
    for e in ("e1", "e2", "e3"):
        assert log.edge_count(e, t) == 1


def test_edge_shares_approach_uniformity(theta_indep):
    b = theta_indep.basis
    init = pg.InitialCondition("e1", b.symbol("t1", Fraction(1, 2)), "v1")
    log = pg.simulate(theta_indep, init, b.symbol("t1", 60))
    t = b.symbol("t1", Fraction(575, 10))
    n = log.packet_count(t)
    s = sum(e.time.witness for e in theta_indep.edges)
    for e in theta_indep.edges:
        share = log.edge_count(e.id, t) / n
        assert abs(share * s / e.time.witness - 1.0) < 0.12


def test_unknown_edge_rejected(star_equal):
    b = star_equal.basis
    log = pg.simulate(star_equal,
                      pg.InitialCondition("e1", t0(b, "1/2"), "c"), t0(b, 5))
    with pytest.raises(pg.GraphError):
        log.edge_count("nope", t0(b, 1))


def test_query_beyond_reliable_horizon(star_equal):
    b = star_equal.basis
    log = pg.simulate(star_equal,
                      pg.InitialCondition("e1", t0(b, "1/2"), "c"), t0(b, 5))
    with pytest.raises(pg.QueryHorizonError):
        log.packet_count(t0(b, "9/2"))
    with pytest.raises(pg.QueryHorizonError):
        log.packet_count(t0(b, -1))


def test_departure_count_star_center_period_two(star_equal):
    b = star_equal.basis
    init = pg.InitialCondition("e1", t0(b, "1/2"), "c")
    log = pg.simulate(star_equal, init, t0(b, 20))
    # increments by 1 at 1/2, 1/2 + 2, 1/2 + 4, ...
    for e in ("e1", "e2", "e3"):
        for k in range(8):
            just_before = t0(b, Fraction(1, 2) + 2 * k) - t0(b, "1/100")
            at = t0(b, Fraction(1, 2) + 2 * k)
            assert log.departure_count("c", e, just_before) == k
            assert log.departure_count("c", e, at) == k + 1


def test_departure_count_not_adjacent(path_12):
    b = path_12.basis
    log = pg.simulate(path_12,
                      pg.InitialCondition("e1", t0(b, "1/2"), "u"), t0(b, 10))
    with pytest.raises(pg.GraphError):
        log.departure_count("u", "e2", t0(b, 1))


# -- segments -------------------------------------------------------------------------


def test_segment_full_edge_equals_edge_count(theta_indep):
    b = theta_indep.basis
    init = pg.InitialCondition("e1", b.symbol("t1", Fraction(1, 2)), "v1")
    log = pg.simulate(theta_indep, init, b.symbol("t1", 25))
    zero = b.zero()
    for e in theta_indep.edges:
        for k in (7, 45, 61):
            t = b.symbol("t1", Fraction(k, 3))
            assert (log.segment_count(e.id, zero, e.time, t)
                    == log.edge_count(e.id, t))


def test_segment_tau_zero_generic_time(theta_indep):
    b = theta_indep.basis
    init = pg.InitialCondition("e1", b.symbol("t1", Fraction(1, 2)), "v1")
    log = pg.simulate(theta_indep, init, b.symbol("t1", 25))
    off = b.symbol("t1", Fraction(1, 4))
    zero = b.zero()
    assert log.segment_count("e1", off, zero, b.symbol("t1", Fraction(64, 7))) == 0


def test_segment_matches_departure_difference_formula(theta_indep, star_equal):
    cases = [
        (theta_indep, Fraction(1, 4), Fraction(1, 4), Fraction(1, 7)),
        (star_equal, Fraction(1, 8), Fraction(1, 4), Fraction(1, 16)),
    ]
    for g, off_q, tau_q, frac in cases:
        b = g.basis
        init = pg.InitialCondition("e1", halfway(g, "e1"), g.vertices[0])
        log = pg.simulate(g, init, b.symbol(b.names[0], 25))
        off = b.symbol(b.names[0], off_q)
        tau = b.symbol(b.names[0], tau_q)
        for e in g.edges:
            for k in range(3, 23):
                t = b.symbol(b.names[0], k + frac)
                direct = log.segment_count(e.id, off, tau, t)
                via_deps = log.segment_count_by_departures(e.id, off, tau, t)
                assert direct == via_deps


def test_segment_validation(star_equal):
    b = star_equal.basis
    log = pg.simulate(star_equal,
                      pg.InitialCondition("e1", t0(b, "1/2"), "c"), t0(b, 8))
    with pytest.raises(pg.SimulationError):
        log.segment_count("e1", t0(b, "3/4"), t0(b, "1/2"), t0(b, 3))
    with pytest.raises(pg.SimulationError):
        log.segment_count("e1", -t0(b, "1/4"), t0(b, "1/2"), t0(b, 3))


# -- series and invariants -------------------------------------------------------------


def test_count_series_empty(star_equal):
    b = star_equal.basis
    log = pg.simulate(star_equal,
                      pg.InitialCondition("e1", t0(b, "1/2"), "c"), t0(b, 8))
    series = log.count_series([])
    assert len(series) == 0


def test_count_series_sorted_required(star_equal):
    b = star_equal.basis
    log = pg.simulate(star_equal,
                      pg.InitialCondition("e1", t0(b, "1/2"), "c"), t0(b, 8))
    with pytest.raises(pg.SimulationError):
        log.count_series([t0(b, 2), t0(b, 1)])


def test_count_series_monotone_for_independent(theta_indep):
    b = theta_indep.basis
    init = pg.InitialCondition("e1", b.symbol("t1", Fraction(1, 2)), "v1")
    log = pg.simulate(theta_indep, init, b.symbol("t1", 40))
    ts = [b.symbol("t1", Fraction(k, 3)) for k in range(1, 114)]
    series = log.count_series(ts)
    ns = series.n
    assert all(a <= b2 for a, b2 in zip(ns, ns[1:]))


def test_vertex_shift_inequality(theta_indep, star_equal, loop_pendant):
    # departures from a spread to b within one path travel time delta:
    # D_{a->d}(t + 2 delta) >= D_{b->d'}(t)
    for g in (theta_indep, star_equal, loop_pendant):
        b = g.basis
        init = pg.InitialCondition(g.edges[0].id, halfway(g, g.edges[0].id),
                                   "a")
        log = pg.simulate(g, init, b.symbol(b.names[0], 40))
        delta = _path_times(g)
        for va in g.vertices:
            for vb in g.vertices:
                # self-loops emit two records per event (one per direction),
                # so the record-count inequality is stated for plain edges
                d_edges = [e.id for e in g.edges
                           if va in (e.a, e.b) and not e.is_loop()]
                dp_edges = [e.id for e in g.edges
                            if vb in (e.a, e.b) and not e.is_loop()]
                two_delta = 2 * delta[(va, vb)]
                for ed in d_edges:
                    for edp in dp_edges:
                        for k in (5, 10, 20):
                            t = b.symbol(b.names[0], Fraction(k * 7, 8))
                            lhs = log.departure_count(va, ed, t + two_delta)
                            rhs = log.departure_count(vb, edp, t)
                            assert lhs >= rhs


def _path_times(g):
    """Exact travel time of a shortest (by witness) path between all pairs."""
    import heapq

    out = {}
    for src in g.vertices:
        dist = {src: g.basis.zero()}
        heap = [(0.0, src)]
        seen = set()
        while heap:
            _, v = heapq.heappop(heap)
            if v in seen:
                continue
            seen.add(v)
            for ei, toward in g.slots(v):
                w = g.edges[ei].vertex_at(toward)
                cand = dist[v] + g.edges[ei].time
                if w not in dist or cand.witness < dist[w].witness - 1e-12:
                    dist[w] = cand
                    heapq.heappush(heap, (cand.witness, w))
        for v, d in dist.items():
            out[(src, v)] = d
    return out


def test_records_globally_unique(theta_112, star_equal, theta_indep):
    for g, horizon in ((theta_112, 40), (star_equal, 40), (theta_indep, 25)):
        b = g.basis
        init = pg.InitialCondition("e1", halfway(g, "e1"), g.edges[0].a)
        log = pg.simulate(g, init, b.symbol(b.names[0], horizon))
        keys = np.column_stack([log.times_int,
                                log.edge.astype(np.int64),
                                log.toward.astype(np.int64)])
        assert len(np.unique(keys, axis=0)) == len(log)


def test_local_conservation_per_batch(theta_112, theta_indep, loop_pendant):
    for g, horizon in ((theta_112, 30), (theta_indep, 20), (loop_pendant, 30)):
        b = g.basis
        init = pg.InitialCondition("e1" if g is not loop_pendant else "pend",
                                   halfway(g, g.edges[0].id)
                                   if g is not loop_pendant
                                   else halfway(g, "pend"),
                                   "a")
        log = pg.simulate(g, init, b.symbol(b.names[0], horizon))
        degrees = {i: g.degree(v) for i, v in enumerate(g.vertices)}
        # records of one exact time are contiguous; group and count per vertex
        times = log.times_int
        breaks = [0] + (np.flatnonzero(
            np.any(np.diff(times, axis=0) != 0, axis=1)) + 1).tolist() + [len(log)]
        for lo, hi in zip(breaks, breaks[1:]):
            verts, counts = np.unique(log.vertex[lo:hi], return_counts=True)
            for v, c in zip(verts, counts):
                assert c == degrees[int(v)]


def test_merge_idempotence_rescatter(theta_112):
    # re-scattering any logged batch reproduces exactly the logged records
    b = theta_112.basis
    init = pg.InitialCondition("e1", t0(b, "1/2"), "v1")
    log = pg.simulate(theta_112, init, t0(b, 20))
    times = log.times_int
    breaks = [0] + (np.flatnonzero(
        np.any(np.diff(times, axis=0) != 0, axis=1)) + 1).tolist() + [len(log)]
    for lo, hi in zip(breaks[:12], breaks[1:13]):
        for vi in set(log.vertex[lo:hi].tolist()):
            v = theta_112.vertices[vi]
            rows = [j for j in range(lo, hi) if log.vertex[j] == vi]
            outgoing = {(theta_112.edges[int(log.edge[j])].id,
                         int(log.toward[j])) for j in rows}
            # feed those departures back in as arrivals at their far ends
            assert len(outgoing) == len(rows)
            assert outgoing == {
                (theta_112.edges[ei].id, d)
                for ei, d in theta_112.slots(v)
            }


def test_code_realization_theta(theta_indep):
    b = theta_indep.basis
    init = pg.InitialCondition("e1", b.symbol("t1", Fraction(1, 2)), "v1")
    log = pg.simulate(theta_indep, init, b.symbol("t1", 14))
    s0 = b.symbol("t1", Fraction(1, 2))
    s0_vec = np.array([1, 0, 0], dtype=np.int64)  # scale is 2
    assert log.scale == 2
    for vertex, a, bv in (("v1", "v1", "v1"), ("v2", "v1", "v2")):
        rows = np.unique(
            log.times_int[log.vertex == theta_indep.vertex_index(vertex)],
            axis=0)
        ns = (rows - s0_vec) // log.scale
        assert np.all((rows - s0_vec) % log.scale == 0)
        classes = {tuple(int(x) % 2 for x in row) for row in ns}
        expected = {c.parities for c in pg.codes(theta_indep, a, bv)}
        assert classes == expected


# -- amplitudes ------------------------------------------------------------------------


@pytest.mark.parametrize("m", range(1, 11))
def test_scattering_matrix_orthogonal(m):
    s = scattering_matrix(m)
    assert np.max(np.abs(s @ s.T - np.eye(m))) < 1e-12
    # reflected : transmitted magnitudes are (m-2) : 2
    if m >= 3:
        assert abs(abs(s[0, 0]) / abs(s[0, 1]) - (m - 2) / 2.0) < 1e-12


@pytest.mark.parametrize("engine", ENGINES)
def test_amplitude_energy_conserved(theta_indep, star_equal, engine):
    for g in (theta_indep, star_equal):
        b = g.basis
        init = pg.InitialCondition("e1", halfway(g, "e1"), g.edges[0].a)
        log = pg.simulate(g, init, b.symbol(b.names[0], 20),
                          track_amplitudes=True, engine=engine)
        tau_w = np.array([g.edges[int(e)].time.witness for e in log.edge])
        for x in (4.7, 9.3, 15.1):
            inflight = (log.wit <= x) & (log.wit + tau_w > x)
            energy = float(np.sum(log.amp[inflight] ** 2))
            for p in log.initial_packets:
                if p.arrival.witness > x:
                    energy += p.amp ** 2
            assert abs(energy - 1.0) < 1e-9


def test_amplitude_star_first_split(star_equal):
    b = star_equal.basis
    init = pg.InitialCondition("e1", t0(b, "1/2"), "c")
    log = pg.simulate(star_equal, init, t0(b, 4), track_amplitudes=True)
    first = {(star_equal.edges[int(log.edge[i])].id, float(log.amp[i]))
             for i in range(3)}
    assert first == {("e1", (2.0 - 3) / 3), ("e2", 2.0 / 3), ("e3", 2.0 / 3)}


# -- crossings, determinism, resources ---------------------------------------------------


def test_merge_crossings_point_convention(basis1):
    g = pg.build_graph(["u", "w"], [("e", "u", "w", basis1.symbol("t0"))],
                       basis1)
    init = pg.InitialCondition("e", t0(basis1, "1/2"), "w",
                               emit_both_directions=True)
    log = pg.simulate(g, init, t0(basis1, 10))
    # the two streams coincide at the midpoint at integer times
    assert log.packet_count(t0(basis1, 1)) == 2
    assert log.packet_count(t0(basis1, 1), merge_crossings=True) == 1
    assert log.packet_count(t0(basis1, "5/4")) == 2
    assert log.packet_count(t0(basis1, "5/4"), merge_crossings=True) == 2


@pytest.mark.parametrize("engine", ENGINES)
def test_determinism_byte_identical(theta_indep, engine, tmp_path):
    b = theta_indep.basis
    init = pg.InitialCondition("e1", b.symbol("t1", Fraction(1, 2)), "v1")
    logs = [pg.simulate(theta_indep, init, b.symbol("t1", 15), engine=engine)
            for _ in range(2)]
    for field in ("times_int", "wit", "vertex", "edge", "toward"):
        assert np.array_equal(getattr(logs[0], field), getattr(logs[1], field))
    paths = []
    for i, log in enumerate(logs):
        p = tmp_path / f"log{i}.jsonl"
        log.to_jsonl(str(p))
        paths.append(p)
    assert paths[0].read_bytes() == paths[1].read_bytes()


@pytest.mark.parametrize("engine", ENGINES)
def test_resource_cap(theta_indep, engine):
    b = theta_indep.basis
    init = pg.InitialCondition("e1", b.symbol("t1", Fraction(1, 2)), "v1")
    with pytest.raises(pg.ResourceLimitError):
        pg.simulate(theta_indep, init, b.symbol("t1", 50), max_records=100,
                    engine=engine)


def test_invalid_initial_conditions(star_equal, loop_pendant):
    b = star_equal.basis
    with pytest.raises(pg.SimulationError):
        pg.simulate(star_equal,
                    pg.InitialCondition("e1", b.zero(), "c"), t0(b, 5))
    with pytest.raises(pg.SimulationError):
        pg.simulate(star_equal,
                    pg.InitialCondition("e1", t0(b, 1), "c"), t0(b, 5))
    with pytest.raises(pg.SimulationError):
        pg.simulate(star_equal,
                    pg.InitialCondition("e1", t0(b, "1/2"), "zz"), t0(b, 5))
    with pytest.raises(pg.SimulationError):
        pg.simulate(star_equal,
                    pg.InitialCondition("e1", t0(b, "1/2"), "c"), t0(b, 0))
    lb = loop_pendant.basis
    with pytest.raises(pg.SimulationError, match="self-loop"):
        pg.simulate(loop_pendant,
                    pg.InitialCondition("loop", t0(lb, "1/2"), "u"),
                    t0(lb, 5))


def test_jsonl_export_fields(star_equal, tmp_path):
    import json

    b = star_equal.basis
    init = pg.InitialCondition("e1", t0(b, "1/2"), "c")
    log = pg.simulate(star_equal, init, t0(b, 4))
    path = tmp_path / "events.jsonl"
    log.to_jsonl(str(path))
    lines = [json.loads(x) for x in path.read_text().splitlines()]
    assert lines[0]["vertex"] is None
    assert lines[1] == {"t_real": 0.5, "t_exact": {"t0": "1/2"},
                        "vertex": "c", "edge": "e1", "dir": "b"}
