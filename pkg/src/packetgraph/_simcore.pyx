# cython: language_level=3
"""Compiled event loop; hot-kernel twin of _engine_py.run_simulation.

Implements the identical algorithm (same comparator, same witness
accumulation order, same batch grouping) with C buffers and an index
heap, and must produce byte-identical output arrays.
"""

from libc.stdlib cimport free, malloc, realloc
from libc.string cimport memcpy
from libc.math cimport fabs

import numpy as np

from .errors import AmbiguousOrderingError, ResourceLimitError


cdef struct Buffers:
    # event pool (pending arrivals), slot-reused via freelist
    long long* vec      # pool_cap * K
    double* w
    int* vertex
    int* edge
    signed char* toward
    double* amp
    int pool_cap
    int* freelist
    int free_top
    # heap of pool indices
    int* heap
    int heap_size
    int heap_cap
    # batch scratch (pool indices)
    int* batch
    int batch_size
    int batch_cap
    # output buffers
    long long* o_times
    double* o_w
    int* o_vertex
    int* o_edge
    signed char* o_toward
    double* o_amp
    long long n_rec
    long long out_cap


cdef void buffers_free(Buffers* b):
    free(b.vec); free(b.w); free(b.vertex); free(b.edge); free(b.toward)
    free(b.amp); free(b.freelist); free(b.heap); free(b.batch)
    free(b.o_times); free(b.o_w); free(b.o_vertex); free(b.o_edge)
    free(b.o_toward); free(b.o_amp)


cdef int grow_pool(Buffers* b, int K) except -1:
    cdef int new_cap = b.pool_cap * 2 if b.pool_cap else 1024
    b.vec = <long long*> realloc(b.vec, new_cap * K * sizeof(long long))
    b.w = <double*> realloc(b.w, new_cap * sizeof(double))
    b.vertex = <int*> realloc(b.vertex, new_cap * sizeof(int))
    b.edge = <int*> realloc(b.edge, new_cap * sizeof(int))
    b.toward = <signed char*> realloc(b.toward, new_cap * sizeof(signed char))
    b.amp = <double*> realloc(b.amp, new_cap * sizeof(double))
    b.freelist = <int*> realloc(b.freelist, new_cap * sizeof(int))
    if (b.vec == NULL or b.w == NULL or b.vertex == NULL or b.edge == NULL
            or b.toward == NULL or b.amp == NULL or b.freelist == NULL):
        raise MemoryError()
    cdef int i
    for i in range(new_cap - 1, b.pool_cap - 1, -1):
        b.freelist[b.free_top] = i
        b.free_top += 1
    b.pool_cap = new_cap
    return 0


cdef int grow_out(Buffers* b, int K, bint track_amp) except -1:
    cdef long long new_cap = b.out_cap * 2 if b.out_cap else 4096
    b.o_times = <long long*> realloc(b.o_times, new_cap * K * sizeof(long long))
    b.o_w = <double*> realloc(b.o_w, new_cap * sizeof(double))
    b.o_vertex = <int*> realloc(b.o_vertex, new_cap * sizeof(int))
    b.o_edge = <int*> realloc(b.o_edge, new_cap * sizeof(int))
    b.o_toward = <signed char*> realloc(b.o_toward, new_cap * sizeof(signed char))
    if track_amp:
        b.o_amp = <double*> realloc(b.o_amp, new_cap * sizeof(double))
    if (b.o_times == NULL or b.o_w == NULL or b.o_vertex == NULL
            or b.o_edge == NULL or b.o_toward == NULL
            or (track_amp and b.o_amp == NULL)):
        raise MemoryError()
    b.out_cap = new_cap
    return 0


cdef inline int vec_cmp(long long* a, long long* b, int K) noexcept:
    cdef int k
    for k in range(K):
        if a[k] != b[k]:
            return -1 if a[k] < b[k] else 1
    return 0


cdef inline bint entry_less(Buffers* b, int i, int j, int K) noexcept:
    # identical order to the pure engine's flat tuples
    if b.w[i] != b.w[j]:
        return b.w[i] < b.w[j]
    cdef int c = vec_cmp(b.vec + i * K, b.vec + j * K, K)
    if c != 0:
        return c < 0
    if b.vertex[i] != b.vertex[j]:
        return b.vertex[i] < b.vertex[j]
    if b.edge[i] != b.edge[j]:
        return b.edge[i] < b.edge[j]
    return b.toward[i] < b.toward[j]


cdef void heap_push(Buffers* b, int idx, int K) noexcept:
    cdef int pos = b.heap_size
    cdef int parent
    b.heap[pos] = idx
    b.heap_size += 1
    while pos > 0:
        parent = (pos - 1) >> 1
        if entry_less(b, b.heap[pos], b.heap[parent], K):
            b.heap[pos], b.heap[parent] = b.heap[parent], b.heap[pos]
            pos = parent
        else:
            break


cdef int heap_pop(Buffers* b, int K) noexcept:
    cdef int top = b.heap[0]
    cdef int pos = 0
    cdef int child
    b.heap_size -= 1
    b.heap[0] = b.heap[b.heap_size]
    while True:
        child = 2 * pos + 1
        if child >= b.heap_size:
            break
        if (child + 1 < b.heap_size
                and entry_less(b, b.heap[child + 1], b.heap[child], K)):
            child += 1
        if entry_less(b, b.heap[child], b.heap[pos], K):
            b.heap[pos], b.heap[child] = b.heap[child], b.heap[pos]
            pos = child
        else:
            break
    return top


def run_simulation(dict setup):
    cdef int K = setup["K"]
    cdef int n_edges = len(setup["edge_vecs"])
    cdef int n_vertices = len(setup["adjacency"])
    cdef double eps = setup["epsilon"]
    cdef double horizon_wit = setup["horizon_wit"]
    cdef long long max_records = setup["max_records"]
    cdef bint track_amp = setup["track_amp"]

    cdef double* wits = <double*> malloc(K * sizeof(double))
    cdef long long* edge_vecs = <long long*> malloc(n_edges * K * sizeof(long long))
    cdef double* edge_wit = <double*> malloc(n_edges * sizeof(double))
    cdef int* edge_dst = <int*> malloc(n_edges * 2 * sizeof(int))
    cdef long long* horizon_vec = <long long*> malloc(K * sizeof(long long))
    cdef int total_slots = sum(len(s) for s in setup["adjacency"])
    cdef int* adj_ptr = <int*> malloc((n_vertices + 1) * sizeof(int))
    cdef int* adj_edge = <int*> malloc(max(total_slots, 1) * sizeof(int))
    cdef signed char* adj_toward = <signed char*> malloc(
        max(total_slots, 1) * sizeof(signed char))
    cdef long long* scratch_vec = <long long*> malloc(K * sizeof(long long))

    cdef Buffers b
    b.vec = NULL; b.w = NULL; b.vertex = NULL; b.edge = NULL; b.toward = NULL
    b.amp = NULL; b.freelist = NULL; b.heap = NULL; b.batch = NULL
    b.o_times = NULL; b.o_w = NULL; b.o_vertex = NULL; b.o_edge = NULL
    b.o_toward = NULL; b.o_amp = NULL
    b.pool_cap = 0; b.free_top = 0; b.heap_size = 0; b.heap_cap = 0
    b.batch_size = 0; b.batch_cap = 0; b.n_rec = 0; b.out_cap = 0

    if (wits == NULL or edge_vecs == NULL or edge_wit == NULL
            or edge_dst == NULL or horizon_vec == NULL or adj_ptr == NULL
            or adj_edge == NULL or adj_toward == NULL or scratch_vec == NULL):
        raise MemoryError()

    cdef int i, k, v, s
    try:
        for k in range(K):
            wits[k] = setup["symbol_wit"][k]
        for i, vec in enumerate(setup["edge_vecs"]):
            for k in range(K):
                edge_vecs[i * K + k] = vec[k]
            edge_wit[i] = setup["edge_wit"][i]
        for i, dst in enumerate(setup["edge_dst"]):
            edge_dst[2 * i] = dst[0]
            edge_dst[2 * i + 1] = dst[1]
        for k in range(K):
            horizon_vec[k] = setup["horizon_vec"][k]
        s = 0
        for v, slots in enumerate(setup["adjacency"]):
            adj_ptr[v] = s
            for e_out, d_out in slots:
                adj_edge[s] = e_out
                adj_toward[s] = d_out
                s += 1
        adj_ptr[n_vertices] = s

        return _run(&b, setup, K, wits, edge_vecs, edge_wit, edge_dst,
                    horizon_vec, adj_ptr, adj_edge, adj_toward, scratch_vec,
                    eps, horizon_wit, max_records, track_amp)
    finally:
        free(wits); free(edge_vecs); free(edge_wit); free(edge_dst)
        free(horizon_vec); free(adj_ptr); free(adj_edge); free(adj_toward)
        free(scratch_vec)
        buffers_free(&b)


cdef inline double wit_of(long long* vec, double* wits, int K) noexcept:
    # identical accumulation order to the pure engine
    cdef double w = 0.0
    cdef int k
    for k in range(K):
        w += vec[k] * wits[k]
    return w


cdef int cmp_exact(long long* vec, double w, long long* ovec, double ow,
                   int K, double eps) except? -9:
    if vec_cmp(vec, ovec, K) == 0:
        return 0
    cdef long long nz = 0
    cdef bint multi = False
    cdef int k
    for k in range(K):
        if vec[k] != ovec[k]:
            if nz != 0:
                multi = True
                break
            nz = vec[k] - ovec[k]
    if not multi:
        return 1 if nz > 0 else -1
    cdef double d = w - ow
    if fabs(d) <= eps:
        raise AmbiguousOrderingError(
            f"distinct event times with witness gap {d:.3e} <= epsilon"
        )
    return 1 if d > 0 else -1


cdef object _run(Buffers* b, dict setup, int K, double* wits,
                 long long* edge_vecs, double* edge_wit, int* edge_dst,
                 long long* horizon_vec, int* adj_ptr, int* adj_edge,
                 signed char* adj_toward, long long* scratch_vec,
                 double eps, double horizon_wit, long long max_records,
                 bint track_amp):
    cdef int i, j, k, c, idx, top, v, m, e_out, gi, g0, g1
    cdef signed char d_out
    cdef double w0, nw, amp_out, refl, trans
    cdef long long* vec0 = <long long*> malloc(K * sizeof(long long))
    if vec0 == NULL:
        raise MemoryError()

    try:
        grow_pool(b, K)
        b.heap_cap = 1024
        b.heap = <int*> malloc(b.heap_cap * sizeof(int))
        b.batch_cap = 256
        b.batch = <int*> malloc(b.batch_cap * sizeof(int))
        if b.heap == NULL or b.batch == NULL:
            raise MemoryError()
        grow_out(b, K, track_amp)

        # seed the heap
        for vec, sv, se, sd, samp in setup["seeds"]:
            for k in range(K):
                scratch_vec[k] = vec[k]
            nw = wit_of(scratch_vec, wits, K)
            if not _le_horizon(scratch_vec, nw, horizon_vec, horizon_wit,
                               K, eps):
                continue
            idx = _alloc_event(b, K)
            for k in range(K):
                b.vec[idx * K + k] = scratch_vec[k]
            b.w[idx] = nw
            b.vertex[idx] = sv
            b.edge[idx] = se
            b.toward[idx] = sd
            b.amp[idx] = samp
            _heap_push_grow(b, idx, K)

        while b.heap_size > 0:
            top = heap_pop(b, K)
            w0 = b.w[top]
            memcpy(vec0, b.vec + top * K, K * sizeof(long long))
            b.batch_size = 0
            _batch_add(b, top)
            while (b.heap_size > 0
                   and vec_cmp(b.vec + b.heap[0] * K, vec0, K) == 0):
                _batch_add(b, heap_pop(b, K))
            if b.heap_size > 0:
                i = b.heap[0]
                if fabs(b.w[i] - w0) <= eps:
                    cmp_exact(b.vec + i * K, b.w[i], vec0, w0, K, eps)

            # deterministic batch order: sort by (vertex, edge, toward)
            _sort_batch(b)

            gi = 0
            while gi < b.batch_size:
                g0 = gi
                v = b.vertex[b.batch[g0]]
                while gi < b.batch_size and b.vertex[b.batch[gi]] == v:
                    gi += 1
                g1 = gi
                m = adj_ptr[v + 1] - adj_ptr[v]
                refl = (2.0 - m) / m
                trans = 2.0 / m
                for j in range(adj_ptr[v], adj_ptr[v + 1]):
                    e_out = adj_edge[j]
                    d_out = adj_toward[j]
                    b.n_rec += 1
                    if b.n_rec > max_records:
                        raise ResourceLimitError(
                            f"simulation exceeded max_records={max_records}"
                        )
                    amp_out = 0.0
                    if track_amp:
                        for i in range(g0, g1):
                            idx = b.batch[i]
                            if b.edge[idx] == e_out and b.toward[idx] == 1 - d_out:
                                amp_out += b.amp[idx] * refl
                            else:
                                amp_out += b.amp[idx] * trans
                    if b.n_rec > b.out_cap:
                        grow_out(b, K, track_amp)
                    memcpy(b.o_times + (b.n_rec - 1) * K, vec0,
                           K * sizeof(long long))
                    b.o_w[b.n_rec - 1] = w0
                    b.o_vertex[b.n_rec - 1] = v
                    b.o_edge[b.n_rec - 1] = e_out
                    b.o_toward[b.n_rec - 1] = d_out
                    if track_amp:
                        b.o_amp[b.n_rec - 1] = amp_out

                    for k in range(K):
                        scratch_vec[k] = vec0[k] + edge_vecs[e_out * K + k]
                    nw = wit_of(scratch_vec, wits, K)
                    if _le_horizon(scratch_vec, nw, horizon_vec, horizon_wit,
                                   K, eps):
                        idx = _alloc_event(b, K)
                        memcpy(b.vec + idx * K, scratch_vec,
                               K * sizeof(long long))
                        b.w[idx] = nw
                        b.vertex[idx] = edge_dst[2 * e_out + d_out]
                        b.edge[idx] = e_out
                        b.toward[idx] = d_out
                        b.amp[idx] = amp_out
                        _heap_push_grow(b, idx, K)

            # release batch pool slots
            for i in range(b.batch_size):
                b.freelist[b.free_top] = b.batch[i]
                b.free_top += 1

        return _collect(b, K, track_amp)
    finally:
        free(vec0)


cdef bint _le_horizon(long long* vec, double w, long long* horizon_vec,
                      double horizon_wit, int K, double eps) except? 0:
    if w < horizon_wit - eps:
        return True
    if w > horizon_wit + eps:
        return False
    return cmp_exact(vec, w, horizon_vec, horizon_wit, K, eps) <= 0


cdef int _alloc_event(Buffers* b, int K) except -1:
    if b.free_top == 0:
        grow_pool(b, K)
    b.free_top -= 1
    return b.freelist[b.free_top]


cdef int _heap_push_grow(Buffers* b, int idx, int K) except -1:
    if b.heap_size >= b.heap_cap:
        b.heap_cap *= 2
        b.heap = <int*> realloc(b.heap, b.heap_cap * sizeof(int))
        if b.heap == NULL:
            raise MemoryError()
    heap_push(b, idx, K)
    return 0


cdef int _batch_add(Buffers* b, int idx) except -1:
    if b.batch_size >= b.batch_cap:
        b.batch_cap *= 2
        b.batch = <int*> realloc(b.batch, b.batch_cap * sizeof(int))
        if b.batch == NULL:
            raise MemoryError()
    b.batch[b.batch_size] = idx
    b.batch_size += 1
    return 0


cdef void _sort_batch(Buffers* b) noexcept:
    # insertion sort by (vertex, edge, toward); batches are small
    cdef int i, j, key
    for i in range(1, b.batch_size):
        key = b.batch[i]
        j = i - 1
        while j >= 0 and _batch_key_greater(b, b.batch[j], key):
            b.batch[j + 1] = b.batch[j]
            j -= 1
        b.batch[j + 1] = key


cdef inline bint _batch_key_greater(Buffers* b, int x, int y) noexcept:
    if b.vertex[x] != b.vertex[y]:
        return b.vertex[x] > b.vertex[y]
    if b.edge[x] != b.edge[y]:
        return b.edge[x] > b.edge[y]
    return b.toward[x] > b.toward[y]


cdef object _collect(Buffers* b, int K, bint track_amp):
    cdef long long n = b.n_rec
    times = np.empty((n, K), dtype=np.int64)
    wit = np.empty(n, dtype=np.float64)
    vertex = np.empty(n, dtype=np.int32)
    edge = np.empty(n, dtype=np.int32)
    toward = np.empty(n, dtype=np.int8)
    amp = np.empty(n, dtype=np.float64) if track_amp else None
    cdef long long[:, ::1] times_v = times
    cdef double[::1] wit_v = wit
    cdef int[::1] vertex_v = vertex
    cdef int[::1] edge_v = edge
    cdef signed char[::1] toward_v = toward
    cdef double[::1] amp_v
    if n > 0:
        memcpy(&times_v[0, 0], b.o_times, n * K * sizeof(long long))
        memcpy(&wit_v[0], b.o_w, n * sizeof(double))
        memcpy(&vertex_v[0], b.o_vertex, n * sizeof(int))
        memcpy(&edge_v[0], b.o_edge, n * sizeof(int))
        memcpy(&toward_v[0], b.o_toward, n * sizeof(signed char))
        if track_amp:
            amp_v = amp
            memcpy(&amp_v[0], b.o_amp, n * sizeof(double))
    result = {"times": times, "wit": wit, "vertex": vertex, "edge": edge,
              "toward": toward}
    if track_amp:
        result["amp"] = amp
    return result
