# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels mirroring ``_pykernels`` exactly."""
from libc.stdlib cimport malloc, free


cdef long* _copy(list seq, Py_ssize_t extra) except NULL:
    cdef Py_ssize_t n = len(seq)
    cdef long* buf = <long*> malloc((n + extra + 1) * sizeof(long))
    if buf == NULL:
        raise MemoryError()
    cdef Py_ssize_t i
    for i in range(n):
        buf[i] = seq[i]
    return buf


cdef long _lev(const long* a, Py_ssize_t n, const long* b, Py_ssize_t m, long* row) nogil:
    cdef Py_ssize_t i, j
    cdef long diag, up, best, ai
    for j in range(m + 1):
        row[j] = j
    for i in range(1, n + 1):
        diag = row[0]
        row[0] = i
        ai = a[i - 1]
        for j in range(1, m + 1):
            up = row[j]
            best = diag + (ai != b[j - 1])
            if up + 1 < best:
                best = up + 1
            if row[j - 1] + 1 < best:
                best = row[j - 1] + 1
            row[j] = best
            diag = up
    return row[m]


def edit_distance(list a, list b):
    cdef Py_ssize_t n = len(a), m = len(b)
    cdef long* ca = _copy(a, 0)
    cdef long* cb = NULL
    cdef long* row = NULL
    cdef long out
    try:
        cb = _copy(b, 0)
        row = <long*> malloc((m + 1) * sizeof(long))
        if row == NULL:
            raise MemoryError()
        out = _lev(ca, n, cb, m, row)
    finally:
        free(ca)
        free(cb)
        free(row)
    return out


cdef bint _same(const long* x, Py_ssize_t i, const long* y, Py_ssize_t j, Py_ssize_t n) nogil:
    cdef Py_ssize_t k
    for k in range(n):
        if x[i + k] != y[j + k]:
            return False
    return True


def ngram_stats(list hyp, list ref, int max_order):
    cdef Py_ssize_t nh = len(hyp), nr = len(ref)
    cdef long* h = _copy(hyp, 0)
    cdef long* r = NULL
    cdef Py_ssize_t n, i, k
    cdef long ch, cr, total
    cdef bint seen
    matches = [0] * max_order
    hyp_totals = [0] * max_order
    ref_totals = [0] * max_order
    try:
        r = _copy(ref, 0)
        for n in range(1, max_order + 1):
            hyp_totals[n - 1] = nh - n + 1 if nh >= n else 0
            ref_totals[n - 1] = nr - n + 1 if nr >= n else 0
            if nh < n or nr < n:
                continue
            total = 0
            for i in range(nh - n + 1):
                seen = False
                for k in range(i):
                    if _same(h, k, h, i, n):
                        seen = True
                        break
                if seen:
                    continue
                ch = 1
                for k in range(i + 1, nh - n + 1):
                    if _same(h, k, h, i, n):
                        ch += 1
                cr = 0
                for k in range(nr - n + 1):
                    if _same(r, k, h, i, n):
                        cr += 1
                total += ch if ch < cr else cr
            matches[n - 1] = total
    finally:
        free(h)
        free(r)
    return matches, hyp_totals, ref_totals


def shift_candidates(list hyp, list ref, int max_span, int max_dist):
    cdef Py_ssize_t n = len(hyp), m = len(ref)
    cdef long* h = _copy(hyp, 0)
    cdef long* r = NULL
    cdef long* buf = NULL
    cdef long* row = NULL
    cdef Py_ssize_t i, length, p, lo, hi, k, w
    cdef long cur, gain, best = 0
    cdef bint have = False
    found = []
    try:
        r = _copy(ref, 0)
        buf = <long*> malloc((n + 1) * sizeof(long))
        row = <long*> malloc((m + 1) * sizeof(long))
        if buf == NULL or row == NULL:
            raise MemoryError()
        cur = _lev(h, n, r, m, row)
        for i in range(n):
            for length in range(1, min(max_span, n - i) + 1):
                lo = i - max_dist if i - max_dist > 0 else 0
                hi = n - length if n - length < i + max_dist else i + max_dist
                for p in range(lo, hi + 1):
                    if p == i:
                        continue
                    # rest = h without the block; result = rest[:p] + block + rest[p:]
                    w = 0
                    k = 0
                    while w < p:
                        if k == i:
                            k += length
                        buf[w] = h[k]
                        w += 1
                        k += 1
                    for k in range(length):
                        buf[w + k] = h[i + k]
                    w += length
                    k = p if p < i else p + length
                    while w < n:
                        if k == i:
                            k += length
                        buf[w] = h[k]
                        w += 1
                        k += 1
                    gain = cur - _lev(buf, n, r, m, row)
                    if not have or gain > best:
                        have = True
                        best = gain
                        found = [(i, length, p)]
                    elif gain == best:
                        found.append((i, length, p))
    finally:
        free(h)
        free(r)
        free(buf)
        free(row)
    if not have:
        return cur, 0, []
    return cur, best, found
