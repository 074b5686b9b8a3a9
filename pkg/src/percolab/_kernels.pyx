# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops.

Site hashing, union-find labeling, batched touch-event tallies and exhaustive
enumeration. ``percolab._pykernels`` exposes the same functions on top of
numpy/scipy and must agree with this module bit for bit.
"""
import numpy as np

from libc.stdint cimport int32_t, int64_t, uint8_t, uint64_t
from libc.stdlib cimport calloc, free, malloc

cdef extern from *:
    """
    #include <stdint.h>
    static inline uint64_t pl_mix64(uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    static inline uint64_t pl_coord(int64_t c) {
        return ((uint64_t)c) * 0xD6E8FEB86659FD93ULL;
    }
    static inline int pl_popcount(uint64_t x) { return __builtin_popcountll(x); }
    """
    uint64_t pl_mix64(uint64_t z) nogil
    uint64_t pl_coord(int64_t c) nogil
    int pl_popcount(uint64_t x) nogil

NAME = "cython"

cdef enum:
    MAXD = 32


cdef void _fill(uint64_t key, int d, const int64_t* lo, const int64_t* ext,
                const uint8_t* within, uint64_t thr, bint full,
                uint64_t* u_out, uint8_t* open_out) noexcept nogil:
    # C-order walk; prefix hashes of the outer axes are reused along each row
    cdef int64_t coord[MAXD]
    cdef uint64_t pre[MAXD + 1]
    cdef int64_t idx, total = 1
    cdef int a, b
    cdef uint64_t u
    for a in range(d):
        coord[a] = 0
        total *= ext[a]
    pre[0] = key
    for a in range(d - 1):
        pre[a + 1] = pl_mix64(pre[a] ^ pl_coord(lo[a]))
    for idx in range(total):
        if within == NULL or within[idx]:
            u = pl_mix64(pre[d - 1] ^ pl_coord(lo[d - 1] + coord[d - 1]))
            if u_out != NULL:
                u_out[idx] = u
            if open_out != NULL:
                open_out[idx] = full or u < thr
        else:
            if u_out != NULL:
                u_out[idx] = 0
            if open_out != NULL:
                open_out[idx] = 0
        a = d - 1
        coord[a] += 1
        if coord[a] == ext[a] and a > 0:
            while a > 0 and coord[a] == ext[a]:
                coord[a] = 0
                a -= 1
                coord[a] += 1
            for b in range(a, d - 1):
                pre[b + 1] = pl_mix64(pre[b] ^ pl_coord(lo[b] + coord[b]))


cdef inline int64_t _find(int32_t* parent, int64_t i) noexcept nogil:
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


cdef void _uf_build(const uint8_t* active, int d, const int64_t* ext,
                    int32_t* parent) noexcept nogil:
    # Row-by-row scan along the last axis.  Within a run of open sites the
    # run's root is carried along, so only the d-1 backward neighbours on
    # outer axes need a find.  Roots are the smallest flat index of their
    # component.
    cdef int64_t coord[MAXD]
    cdef int64_t stride[MAXD]
    cdef int64_t idx = 0, total = 1, j, r, rj, x, row, nrows
    cdef int64_t L = ext[d - 1]
    cdef int a
    for a in range(d - 1, -1, -1):
        stride[a] = total
        total *= ext[a]
        coord[a] = 0
    nrows = total // L
    for row in range(nrows):
        r = -1
        for x in range(L):
            if not active[idx]:
                parent[idx] = -1
                r = -1
                idx += 1
                continue
            if r < 0:
                r = idx
            parent[idx] = <int32_t>r
            for a in range(d - 1):
                if coord[a] > 0:
                    j = idx - stride[a]
                    if active[j] and parent[j] != r:
                        rj = _find(parent, j)
                        if rj < r:
                            parent[r] = <int32_t>rj
                            parent[idx] = <int32_t>rj
                            r = rj
                        elif rj > r:
                            parent[rj] = <int32_t>r
            idx += 1
        # advance the outer-axis odometer
        a = d - 2
        while a >= 0:
            coord[a] += 1
            if coord[a] < ext[a]:
                break
            coord[a] = 0
            a -= 1


cdef int _touching(const uint8_t* active, int32_t* parent,
                   const int64_t* a_idx, int64_t na,
                   const int64_t* b_idx, int64_t nb,
                   int32_t* stamp_a, int32_t* stamp_b, int32_t stamp,
                   int k) noexcept nogil:
    # number of clusters meeting both index lists, saturating at k
    cdef int64_t i, r
    cdef int count = 0
    for i in range(na):
        if active[a_idx[i]]:
            r = _find(parent, a_idx[i])
            stamp_a[r] = stamp
    for i in range(nb):
        if active[b_idx[i]]:
            r = _find(parent, b_idx[i])
            if stamp_a[r] == stamp and stamp_b[r] != stamp:
                stamp_b[r] = stamp
                count += 1
                if count >= k:
                    break
    return count


cdef int _unpack_shape(lo, shape, int64_t* clo, int64_t* cext) except -1:
    cdef int d = len(shape)
    if d < 1 or d > MAXD:
        raise ValueError(f"dimension must be in 1..{MAXD}, got {d}")
    for a in range(d):
        clo[a] = lo[a]
        cext[a] = shape[a]
        if cext[a] < 1:
            raise ValueError("empty region")
    return d


def _split_threshold(thr):
    if thr >= 1 << 64:
        return 0, True
    if thr < 0:
        raise ValueError("negative threshold")
    return int(thr), False


def uniforms(uint64_t key, lo, shape):
    """Raw 64-bit site uniforms over the rectangle ``lo + [0, shape)``."""
    cdef int64_t clo[MAXD]
    cdef int64_t cext[MAXD]
    cdef int d = _unpack_shape(lo, shape, clo, cext)
    out = np.empty(tuple(shape), dtype=np.uint64)
    cdef uint64_t[::1] flat = out.reshape(-1)
    with nogil:
        _fill(key, d, clo, cext, NULL, 0, False, &flat[0], NULL)
    return out


def sample(uint64_t key, lo, shape, thr, within=None):
    """Open-site mask: site open iff its uniform is below ``thr`` (``thr >= 2**64``: all open)."""
    cdef int64_t clo[MAXD]
    cdef int64_t cext[MAXD]
    cdef int d = _unpack_shape(lo, shape, clo, cext)
    t, full = _split_threshold(thr)
    cdef uint64_t cthr = t
    cdef bint cfull = full
    out = np.empty(tuple(shape), dtype=np.uint8)
    cdef uint8_t[::1] flat = out.reshape(-1)
    cdef const uint8_t[::1] w
    cdef const uint8_t* wp = NULL
    if within is not None:
        w = np.ascontiguousarray(within, dtype=np.uint8).reshape(-1)
        wp = &w[0]
    with nogil:
        _fill(key, d, clo, cext, wp, cthr, cfull, NULL, &flat[0])
    return out.view(np.bool_)


def label(active):
    """Union-find labeling with 2d-neighbour adjacency.

    Returns ``(labels, count)``; labels are 1..count in order of first
    appearance in C order, 0 on inactive sites.
    """
    arr = np.ascontiguousarray(active, dtype=np.uint8)
    cdef int64_t cext[MAXD]
    cdef int d = arr.ndim
    cdef int a
    if d < 1 or d > MAXD:
        raise ValueError("bad dimension")
    for a in range(d):
        cext[a] = arr.shape[a]
    labels = np.zeros(arr.shape, dtype=np.int32)
    if arr.size == 0:
        return labels, 0
    cdef const uint8_t[::1] act = arr.reshape(-1)
    cdef int32_t[::1] lab = labels.reshape(-1)
    cdef int64_t n = arr.size, i, r
    cdef int32_t count = 0
    cdef int32_t* parent = <int32_t*>malloc(n * sizeof(int32_t))
    if parent == NULL:
        raise MemoryError()
    try:
        with nogil:
            _uf_build(&act[0], d, cext, parent)
            # parent pointers always point to smaller indices, so an in-order
            # pass sees every parent's final label before the child
            for i in range(n):
                if act[i]:
                    r = parent[i]
                    if r == i:
                        count += 1
                        lab[i] = count
                    else:
                        lab[i] = lab[r]
    finally:
        free(parent)
    return labels, int(count)


def touch_indicators(const uint64_t[::1] keys, lo, shape, thr, within,
                     const int64_t[::1] a_idx, const int64_t[::1] b_idx,
                     int k, bint negate):
    """Per-trial indicator of ``#clusters meeting A and B >= k`` (xor ``negate``).

    One trial per entry of ``keys``; sites outside ``within`` are closed.
    """
    cdef int64_t clo[MAXD]
    cdef int64_t cext[MAXD]
    cdef int d = _unpack_shape(lo, shape, clo, cext)
    t, full = _split_threshold(thr)
    cdef uint64_t cthr = t
    cdef bint cfull = full
    cdef const uint8_t[::1] w = np.ascontiguousarray(within, dtype=np.uint8).reshape(-1)
    cdef int64_t n = w.shape[0], T = keys.shape[0], ti
    cdef int64_t na = a_idx.shape[0], nb = b_idx.shape[0]
    cdef const int64_t* ap = &a_idx[0] if na > 0 else NULL
    cdef const int64_t* bp = &b_idx[0] if nb > 0 else NULL
    out = np.zeros(T, dtype=np.uint8)
    if T == 0:
        return out
    cdef uint8_t[::1] res = out
    cdef uint8_t* buf = <uint8_t*>malloc(n)
    cdef int32_t* parent = <int32_t*>malloc(n * sizeof(int32_t))
    cdef int32_t* sa = <int32_t*>calloc(n, sizeof(int32_t))
    cdef int32_t* sb = <int32_t*>calloc(n, sizeof(int32_t))
    cdef int count
    try:
        if buf == NULL or parent == NULL or sa == NULL or sb == NULL:
            raise MemoryError()
        with nogil:
            for ti in range(T):
                _fill(keys[ti], d, clo, cext, &w[0], cthr, cfull, NULL, buf)
                _uf_build(buf, d, cext, parent)
                count = _touching(buf, parent, ap, na, bp, nb, sa, sb,
                                  <int32_t>(ti % 2000000000 + 1), k)
                res[ti] = (count >= k) != negate
    finally:
        free(buf)
        free(parent)
        free(sa)
        free(sb)
    return out


def enumerate_touch(shape, within, const int64_t[::1] a_idx,
                    const int64_t[::1] b_idx, int k, bint negate):
    """Exhaustive tally over all open/closed assignments of the ``within`` sites.

    Returns ``counts`` with ``counts[j]`` = number of assignments with exactly
    ``j`` open sites on which the event holds.
    """
    cdef int64_t cext[MAXD]
    cdef int64_t clo[MAXD]
    cdef int d = _unpack_shape([0] * len(shape), shape, clo, cext)
    wmask = np.ascontiguousarray(within, dtype=np.uint8).reshape(-1)
    w_sites = np.flatnonzero(wmask).astype(np.int64)
    cdef int s = w_sites.shape[0]
    if s > 62:
        raise ValueError("too many sites to enumerate")
    cdef const int64_t[::1] ws = w_sites
    cdef int64_t n = wmask.shape[0], na = a_idx.shape[0], nb = b_idx.shape[0]
    cdef const int64_t* ap = &a_idx[0] if na > 0 else NULL
    cdef const int64_t* bp = &b_idx[0] if nb > 0 else NULL
    counts = np.zeros(s + 1, dtype=np.int64)
    cdef int64_t[::1] cnt = counts
    cdef uint64_t c, total = (<uint64_t>1) << s
    cdef int j, count
    cdef int32_t stamp = 0
    cdef uint8_t* buf = <uint8_t*>calloc(n, 1)
    cdef int32_t* parent = <int32_t*>malloc(n * sizeof(int32_t))
    cdef int32_t* sa = <int32_t*>calloc(n, sizeof(int32_t))
    cdef int32_t* sb = <int32_t*>calloc(n, sizeof(int32_t))
    try:
        if buf == NULL or parent == NULL or sa == NULL or sb == NULL:
            raise MemoryError()
        with nogil:
            for c in range(total):
                for j in range(s):
                    buf[ws[j]] = (c >> j) & 1
                _uf_build(buf, d, cext, parent)
                stamp = stamp + 1 if stamp < 2000000000 else 1
                if stamp == 1:
                    for j in range(n):
                        sa[j] = 0
                        sb[j] = 0
                count = _touching(buf, parent, ap, na, bp, nb, sa, sb, stamp, k)
                if (count >= k) != negate:
                    cnt[pl_popcount(c)] += 1
    finally:
        free(buf)
        free(parent)
        free(sa)
        free(sb)
    return counts
