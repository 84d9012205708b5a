# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled simulation kernels.

Mirrors ``_kernels_py`` operation for operation; see that module for the
semantics.  Sums run left to right and orderings break ties by index, so
results are bit-identical to the numpy fallback.
"""

from libc.math cimport ceil, NAN
from libc.stdlib cimport malloc, free

import numpy as np

BACKEND = "cython"

cdef double[8] GAINS
GAINS[:] = [1.25, 0.75, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]

cdef enum:
    KIND_ADDITIVE = 0
    KIND_SCALABLE = 1
    KIND_RANDOMIZED_RENO = 2
    KIND_BBR_CYCLE = 3
    KIND_BBR_INCREMENT = 4

cdef enum:
    SYNC_MINIMAL = 0
    SYNC_SQRT_EXTRA = 1
    SYNC_FULL = 2
    SYNC_BERNOULLI = 3
    SYNC_LARGEST_FIRST = 4
    SYNC_ECN = 5

cdef struct KeyIndex:
    double key
    Py_ssize_t idx


cdef inline bint _less(KeyIndex a, KeyIndex b) noexcept nogil:
    return a.key < b.key or (a.key == b.key and a.idx < b.idx)


cdef void _sift_down(KeyIndex *h, Py_ssize_t start, Py_ssize_t size) noexcept nogil:
    cdef Py_ssize_t root = start
    cdef Py_ssize_t child
    cdef KeyIndex tmp
    while True:
        child = 2 * root + 1
        if child >= size:
            return
        if child + 1 < size and _less(h[child + 1], h[child]):
            child += 1
        if not _less(h[child], h[root]):
            return
        tmp = h[root]
        h[root] = h[child]
        h[child] = tmp
        root = child


cdef void _heapify(KeyIndex *h, Py_ssize_t size) noexcept nogil:
    cdef Py_ssize_t i = size // 2
    while i > 0:
        i -= 1
        _sift_down(h, i, size)


cdef KeyIndex _pop(KeyIndex *h, Py_ssize_t *size) noexcept nogil:
    # the ranking is only consumed as a prefix, so pop lazily instead of sorting
    cdef KeyIndex top = h[0]
    size[0] -= 1
    h[0] = h[size[0]]
    _sift_down(h, 0, size[0])
    return top


cdef Py_ssize_t _minimal_prefix(double[::1] w, KeyIndex *order, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t k
    cdef double m = 0.0
    cdef double need
    for k in range(n):
        if k == 0 or w[order[k].idx] < m:
            m = w[order[k].idx]
        need = ceil(<double> n / (1.0 + m / 2.0))
        if <double> (k + 1) >= need:
            return k + 1
    return n


def minimal_prefix(double[::1] w, long[::1] order):
    cdef Py_ssize_t n = w.shape[0]
    cdef Py_ssize_t i
    cdef KeyIndex *buf = <KeyIndex *> malloc(n * sizeof(KeyIndex))
    if buf == NULL:
        raise MemoryError()
    try:
        for i in range(n):
            buf[i].idx = order[i]
            buf[i].key = 0.0
        return _minimal_prefix(w, buf, n)
    finally:
        free(buf)


def run_block(double[::1] w, long[::1] phase, double[::1] base,
              double[:, ::1] sel_u, double[:, ::1] react_u,
              int kind, double beta, double floor, double lo, double hi,
              double bdp, double buffer, int sync_code, double sync_p,
              Py_ssize_t sync_k, double ecn_threshold, Py_ssize_t extra,
              Py_ssize_t cap,
              double[::1] out_W, unsigned char[::1] out_loss,
              unsigned char[::1] out_mark, long[::1] out_nd,
              double[::1] out_wmin, double[::1] out_wmax,
              double[::1] out_dmin, long[::1] out_adj,
              double[:, ::1] rec_w, unsigned char[:, ::1] rec_d,
              Py_ssize_t t0):
    cdef Py_ssize_t n = w.shape[0]
    cdef Py_ssize_t slots = sel_u.shape[0]
    cdef bint recording = rec_w.shape[0] > 0
    cdef double full_level = bdp + buffer
    cdef KeyIndex *order = <KeyIndex *> malloc(n * sizeof(KeyIndex))
    cdef KeyIndex *ranked = <KeyIndex *> malloc(n * sizeof(KeyIndex))
    cdef unsigned char *signal = <unsigned char *> malloc(n * sizeof(unsigned char))
    cdef unsigned char *dec = <unsigned char *> malloc(n * sizeof(unsigned char))
    cdef double *before = <double *> malloc(n * sizeof(double))
    cdef Py_ssize_t j, t, i, size, nd, adj, heap_size, taken
    cdef double m
    cdef double W, s, wmin, wmax, dmin, r, step
    cdef bint loss, mark, moved
    if order == NULL or ranked == NULL or signal == NULL or dec == NULL or before == NULL:
        free(order); free(ranked); free(signal); free(dec); free(before)
        raise MemoryError()
    try:
        with nogil:
            for j in range(slots):
                t = t0 + j
                W = 0.0
                wmin = w[0]
                wmax = w[0]
                for i in range(n):
                    W += w[i]
                    if w[i] < wmin:
                        wmin = w[i]
                    if w[i] > wmax:
                        wmax = w[i]
                    before[i] = w[i]
                    signal[i] = 0
                    dec[i] = 0
                    if recording:
                        rec_w[t, i] = w[i]
                out_W[t] = W
                out_wmin[t] = wmin
                out_wmax[t] = wmax
                loss = W >= full_level
                mark = sync_code == SYNC_ECN and W >= bdp + ecn_threshold
                out_loss[t] = loss
                out_mark[t] = mark

                if loss or mark:
                    for i in range(n):
                        order[i].idx = i
                        if sync_code == SYNC_LARGEST_FIRST:
                            order[i].key = -w[i]
                        else:
                            order[i].key = sel_u[j, i]
                    heap_size = n
                    _heapify(order, heap_size)
                    taken = 0
                    if sync_code == SYNC_MINIMAL or sync_code == SYNC_SQRT_EXTRA:
                        # smallest prefix whose halving stops W from growing
                        m = 0.0
                        while taken < n:
                            ranked[taken] = _pop(order, &heap_size)
                            if taken == 0 or w[ranked[taken].idx] < m:
                                m = w[ranked[taken].idx]
                            taken += 1
                            if <double> taken >= ceil(<double> n / (1.0 + m / 2.0)):
                                break
                        size = taken
                        if sync_code == SYNC_SQRT_EXTRA:
                            size = size + extra
                            if size > n:
                                size = n
                    elif sync_code == SYNC_FULL:
                        size = n
                    elif sync_code == SYNC_BERNOULLI:
                        size = 0
                        for i in range(n):
                            if sel_u[j, i] < sync_p:
                                size += 1
                    else:
                        size = sync_k if sync_k < n else n
                    if size > cap:
                        size = cap
                    while taken < size:
                        ranked[taken] = _pop(order, &heap_size)
                        taken += 1
                    for i in range(size):
                        signal[ranked[i].idx] = 1

                if kind == KIND_ADDITIVE:
                    for i in range(n):
                        if signal[i]:
                            w[i] = w[i] * beta
                            dec[i] = 1
                        else:
                            w[i] = w[i] + 1.0
                elif kind == KIND_SCALABLE:
                    for i in range(n):
                        if signal[i]:
                            w[i] = w[i] * beta
                            dec[i] = 1
                        else:
                            w[i] = w[i] * 1.01
                elif kind == KIND_RANDOMIZED_RENO:
                    for i in range(n):
                        if signal[i]:
                            if react_u[j, i] < 1.0 / w[i]:
                                w[i] = w[i] * 0.5
                                dec[i] = 1
                        else:
                            w[i] = w[i] + 1.0
                elif kind == KIND_BBR_CYCLE:
                    s = full_level / W
                    for i in range(n):
                        if loss:
                            w[i] *= s
                        if signal[i] and phase[i] == 0:
                            dec[i] = 1
                        phase[i] = (phase[i] + 1) % 8
                        w[i] += (GAINS[phase[i]] - 1.0) * base[i]
                elif kind == KIND_BBR_INCREMENT:
                    s = full_level / W
                    for i in range(n):
                        if loss:
                            w[i] *= s
                        step = 0.0
                        if signal[i]:
                            r = react_u[j, i]
                            if r < 0.125:
                                step = -0.25 * base[i]
                            elif r < 0.25:
                                step = 0.25 * base[i]
                        if step < 0.0:
                            dec[i] = 1
                        w[i] += step

                nd = 0
                adj = 0
                dmin = NAN
                for i in range(n):
                    moved = 0
                    if w[i] < floor:
                        w[i] = floor
                        moved = 1
                    if w[i] < lo:
                        w[i] = lo
                        moved = 1
                    if w[i] > hi:
                        w[i] = hi
                        moved = 1
                    adj += moved
                    if dec[i]:
                        if nd == 0 or before[i] < dmin:
                            dmin = before[i]
                        nd += 1
                    if recording:
                        rec_d[t, i] = dec[i]
                out_nd[t] = nd
                out_dmin[t] = dmin
                out_adj[t] = adj
    finally:
        free(order)
        free(ranked)
        free(signal)
        free(dec)
        free(before)


def appendix_c_violations(windows):
    """See ``_kernels_py.appendix_c_violations``."""
    cdef long[:, ::1] v = np.ascontiguousarray(windows, dtype=np.int64)
    cdef Py_ssize_t m = v.shape[0]
    cdef Py_ssize_t n = v.shape[1]
    cdef Py_ssize_t row, i
    cdef long mask, size, total, wmin, need
    cdef long long checked = 0
    cdef long long violations = 0
    if n > 20:
        raise ValueError("subset enumeration is limited to n <= 20")
    with nogil:
        for row in range(m):
            for mask in range(1, 1 << n):
                size = 0
                total = 0
                wmin = 0
                for i in range(n):
                    if (mask >> i) & 1:
                        if size == 0 or v[row, i] < wmin:
                            wmin = v[row, i]
                        size += 1
                        total += v[row, i]
                need = (2 * n + 1 + wmin) // (2 + wmin)
                if size >= need:
                    checked += 1
                    if 2 * (n - size) - total > 0:
                        violations += 1
    return int(checked), int(violations)
