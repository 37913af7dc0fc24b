"""Pure-Python event loop; reference implementation of the engine contract.

A heap of pending arrivals is drained in exact time order. Heap entries
are flat tuples (witness, *coeff vector, vertex, edge, toward[, amp]);
the witness of a vector is always recomputed with the same left-to-right
accumulation, so equal vectors carry bit-identical witnesses and batch
grouping never depends on accumulation history. Output arrays are built
in array.array buffers to keep memory flat.

The compiled engine in _simcore.pyx implements exactly this algorithm;
the two must produce byte-identical outputs.
"""

from __future__ import annotations

import heapq
from array import array

import numpy as np

from .errors import AmbiguousOrderingError, ResourceLimitError


def run_simulation(setup: dict) -> dict:
    K = setup["K"]
    wits = [float(w) for w in setup["symbol_wit"]]
    edge_vecs = [tuple(int(c) for c in v) for v in setup["edge_vecs"]]
    edge_dst = [tuple(d) for d in setup["edge_dst"]]
    adjacency = [tuple(s) for s in setup["adjacency"]]
    horizon_vec = tuple(int(c) for c in setup["horizon_vec"])
    horizon_wit = float(setup["horizon_wit"])
    eps = float(setup["epsilon"])
    max_records = int(setup["max_records"])
    track_amp = bool(setup["track_amp"])

    def wit_of(vec) -> float:
        w = 0.0
        for k in range(K):
            w += vec[k] * wits[k]
        return w

    def cmp_exact(vec, w, ovec, ow) -> int:
        # 0 only for identical vectors; single-symbol differences are
        # ordered exactly, anything else by witness with the eps guard
        if vec == ovec:
            return 0
        nz = 0
        multi = False
        for a, b in zip(vec, ovec):
            if a != b:
                if nz:
                    multi = True
                    break
                nz = a - b
        if not multi:
            return 1 if nz > 0 else -1
        d = w - ow
        if abs(d) <= eps:
            raise AmbiguousOrderingError(
                f"distinct event times with witness gap {d:.3e} <= epsilon"
            )
        return 1 if d > 0 else -1

    def le_horizon(vec, w) -> bool:
        if w < horizon_wit - eps:
            return True
        if w > horizon_wit + eps:
            return False
        return cmp_exact(vec, w, horizon_vec, horizon_wit) <= 0

    out_times = array("q")
    out_wit = array("d")
    out_vertex = array("i")
    out_edge = array("i")
    out_toward = array("b")
    out_amp = array("d") if track_amp else None

    heap: list = []
    for vec, v, e, d, amp in setup["seeds"]:
        vec = tuple(int(c) for c in vec)
        w = wit_of(vec)
        if le_horizon(vec, w):
            entry = (w, *vec, v, e, d, amp) if track_amp else (w, *vec, v, e, d)
            heapq.heappush(heap, entry)

    n_rec = 0
    push = heapq.heappush
    pop = heapq.heappop
    while heap:
        first = pop(heap)
        w0 = first[0]
        vec0 = first[1:K + 1]
        batch: dict[int, list] = {}
        batch[first[K + 1]] = [first[K + 2:]]
        while heap and heap[0][1:K + 1] == vec0:
            entry = pop(heap)
            batch.setdefault(entry[K + 1], []).append(entry[K + 2:])
        if heap:
            nw = heap[0][0]
            if abs(nw - w0) <= eps:
                # raises unless the gap is exactly resolvable
                cmp_exact(heap[0][1:K + 1], nw, vec0, w0)
        for v in sorted(batch):
            arrivals = batch[v]
            slots = adjacency[v]
            m = len(slots)
            refl = (2.0 - m) / m
            trans = 2.0 / m
            for e_out, d_out in slots:
                n_rec += 1
                if n_rec > max_records:
                    raise ResourceLimitError(
                        f"simulation exceeded max_records={max_records}"
                    )
                amp_out = 0.0
                if track_amp:
                    for inc in arrivals:
                        coef = refl if (inc[0] == e_out
                                        and inc[1] == 1 - d_out) else trans
                        amp_out += inc[2] * coef
                    out_amp.append(amp_out)
                out_times.extend(vec0)
                out_wit.append(w0)
                out_vertex.append(v)
                out_edge.append(e_out)
                out_toward.append(d_out)
                evec = edge_vecs[e_out]
                nvec = tuple(c + dc for c, dc in zip(vec0, evec))
                nw = wit_of(nvec)
                if le_horizon(nvec, nw):
                    dst = edge_dst[e_out][d_out]
                    if track_amp:
                        push(heap, (nw, *nvec, dst, e_out, d_out, amp_out))
                    else:
                        push(heap, (nw, *nvec, dst, e_out, d_out))

    n = len(out_wit)
    result = {
        "times": np.frombuffer(out_times, dtype=np.int64).reshape(n, K).copy()
        if n else np.zeros((0, K), dtype=np.int64),
        "wit": np.frombuffer(out_wit, dtype=np.float64).copy()
        if n else np.zeros(0, dtype=np.float64),
        "vertex": np.frombuffer(out_vertex, dtype=np.int32).copy()
        if n else np.zeros(0, dtype=np.int32),
        "edge": np.frombuffer(out_edge, dtype=np.int32).copy()
        if n else np.zeros(0, dtype=np.int32),
        "toward": np.frombuffer(out_toward, dtype=np.int8).copy()
        if n else np.zeros(0, dtype=np.int8),
    }
    if track_amp:
        result["amp"] = (np.frombuffer(out_amp, dtype=np.float64).copy()
                         if n else np.zeros(0, dtype=np.float64))
    return result
