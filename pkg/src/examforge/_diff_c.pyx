# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled line diff kernel.

Mirrors :mod:`examforge._diff_py` (the readable reference); operates on
sequences of ints produced by the line-interning wrapper. The sweep runs
entirely in C because it visits millions of tiny sequence pairs.
"""

from libc.stdlib cimport free, malloc


cdef struct Snake:
    int d
    int x
    int y
    int u
    int v


cdef struct OpBuf:
    int* data   # groups of (a_start, deleted, b_start, inserted)
    int count


cdef int _cost_win(const int* a, int a0, int n, const int* b, int b0, int m,
                   int* v) noexcept nogil:
    cdef int off, d, k, x, y
    while n > 0 and m > 0 and a[a0] == b[b0]:
        a0 += 1; b0 += 1; n -= 1; m -= 1
    while n > 0 and m > 0 and a[a0 + n - 1] == b[b0 + m - 1]:
        n -= 1; m -= 1
    if n == 0:
        return m
    if m == 0:
        return n
    off = n + m + 1
    v[off + 1] = 0
    for d in range(n + m + 1):
        for k in range(-d, d + 1, 2):
            if k == -d or (k != d and v[off + k - 1] < v[off + k + 1]):
                x = v[off + k + 1]
            else:
                x = v[off + k - 1] + 1
            y = x - k
            while x < n and y < m and a[a0 + x] == b[b0 + y]:
                x += 1; y += 1
            v[off + k] = x
            if x >= n and y >= m:
                return d
    return -1   # unreachable


cdef int _lcs(const int* a, int n, const int* b, int m,
              int* prev, int* cur) noexcept nogil:
    cdef int i, j, ai
    cdef int* tmp
    if n == 0 or m == 0:
        return 0
    for j in range(m + 1):
        prev[j] = 0
    for i in range(1, n + 1):
        ai = a[i - 1]
        cur[0] = 0
        for j in range(1, m + 1):
            if ai == b[j - 1]:
                cur[j] = prev[j - 1] + 1
            elif prev[j] >= cur[j - 1]:
                cur[j] = prev[j]
            else:
                cur[j] = cur[j - 1]
        tmp = prev; prev = cur; cur = tmp
    return prev[m]


cdef Snake _middle_snake(const int* a, int a0, int n, const int* b, int b0, int m,
                         int* vf, int* vr, int off) noexcept nogil:
    cdef int delta = n - m
    cdef bint odd = delta & 1
    cdef int d, k, x, y, sx, sy, dmax
    cdef Snake s
    vf[off + 1] = 0
    vr[off + 1] = 0
    dmax = (n + m + 1) // 2 + 1
    for d in range(dmax + 1):
        for k in range(-d, d + 1, 2):
            if k == -d or (k != d and vf[off + k - 1] < vf[off + k + 1]):
                x = vf[off + k + 1]
            else:
                x = vf[off + k - 1] + 1
            y = x - k
            sx = x; sy = y
            while x < n and y < m and a[a0 + x] == b[b0 + y]:
                x += 1; y += 1
            vf[off + k] = x
            if odd and -(d - 1) <= k - delta <= d - 1 and x + vr[off + delta - k] >= n:
                s.d = 2 * d - 1; s.x = sx; s.y = sy; s.u = x; s.v = y
                return s
        for k in range(-d, d + 1, 2):
            if k == -d or (k != d and vr[off + k - 1] < vr[off + k + 1]):
                x = vr[off + k + 1]
            else:
                x = vr[off + k - 1] + 1
            y = x - k
            sx = x; sy = y
            while x < n and y < m and a[a0 + n - 1 - x] == b[b0 + m - 1 - y]:
                x += 1; y += 1
            vr[off + k] = x
            if (not odd) and -d <= delta - k <= d and x + vf[off + delta - k] >= n:
                s.d = 2 * d; s.x = n - x; s.y = m - y; s.u = n - sx; s.v = m - sy
                return s
    s.d = -1   # unreachable
    s.x = s.y = s.u = s.v = 0
    return s


cdef void _emit(OpBuf* ob, int a0, int deleted, int b0, int inserted) noexcept nogil:
    cdef int* h
    if ob.count > 0:
        h = ob.data + 4 * (ob.count - 1)
        if h[0] + h[1] == a0 and h[2] + h[3] == b0:
            h[1] += deleted
            h[3] += inserted
            return
    h = ob.data + 4 * ob.count
    h[0] = a0; h[1] = deleted; h[2] = b0; h[3] = inserted
    ob.count += 1


cdef void _recurse(const int* a, int a0, int n, const int* b, int b0, int m,
                   int* vf, int* vr, int off, OpBuf* ob) noexcept nogil:
    cdef Snake s
    while n > 0 and m > 0 and a[a0] == b[b0]:
        a0 += 1; b0 += 1; n -= 1; m -= 1
    while n > 0 and m > 0 and a[a0 + n - 1] == b[b0 + m - 1]:
        n -= 1; m -= 1
    if n == 0 and m == 0:
        return
    if n == 0 or m == 0:
        _emit(ob, a0, n, b0, m)
        return
    s = _middle_snake(a, a0, n, b, b0, m, vf, vr, off)
    _recurse(a, a0, s.x, b, b0, s.y, vf, vr, off, ob)
    _recurse(a, a0 + s.u, n - s.u, b, b0 + s.v, m - s.v, vf, vr, off, ob)


cdef int* _convert(seq, Py_ssize_t n) except? NULL:
    cdef int* arr = <int*> malloc((n if n > 0 else 1) * sizeof(int))
    cdef Py_ssize_t i
    if arr == NULL:
        raise MemoryError()
    try:
        for i in range(n):
            arr[i] = seq[i]
    except BaseException:
        free(arr)
        raise
    return arr


def lcs_length(a, b):
    """Length of the longest common subsequence (row-rolling DP)."""
    cdef Py_ssize_t n = len(a), m = len(b)
    cdef int* ca = _convert(a, n)
    cdef int* cb = NULL
    cdef int* prev = NULL
    cdef int* cur = NULL
    cdef int result
    try:
        cb = _convert(b, m)
        prev = <int*> malloc((m + 1) * sizeof(int))
        cur = <int*> malloc((m + 1) * sizeof(int))
        if prev == NULL or cur == NULL:
            raise MemoryError()
        result = _lcs(ca, <int> n, cb, <int> m, prev, cur)
    finally:
        free(ca); free(cb); free(prev); free(cur)
    return result


def edit_cost(a, b):
    """Cost (deleted + inserted lines) of a minimal edit script."""
    cdef Py_ssize_t n = len(a), m = len(b)
    cdef int* ca = _convert(a, n)
    cdef int* cb = NULL
    cdef int* v = NULL
    cdef int result
    try:
        cb = _convert(b, m)
        v = <int*> malloc((2 * (n + m) + 3) * sizeof(int))
        if v == NULL:
            raise MemoryError()
        result = _cost_win(ca, 0, <int> n, cb, 0, <int> m, v)
    finally:
        free(ca); free(cb); free(v)
    return result


def edit_hunks(a, b):
    """Minimal edit script as merged hunks (a_start, deleted, b_start, inserted)."""
    cdef Py_ssize_t n = len(a), m = len(b)
    cdef int* ca = _convert(a, n)
    cdef int* cb = NULL
    cdef int* vf = NULL
    cdef int* vr = NULL
    cdef OpBuf ob
    cdef int i
    ob.data = NULL
    ob.count = 0
    try:
        cb = _convert(b, m)
        vf = <int*> malloc((2 * (n + m) + 3) * sizeof(int))
        vr = <int*> malloc((2 * (n + m) + 3) * sizeof(int))
        ob.data = <int*> malloc(4 * (n + m + 1) * sizeof(int))
        if vf == NULL or vr == NULL or ob.data == NULL:
            raise MemoryError()
        _recurse(ca, 0, <int> n, cb, 0, <int> m, vf, vr, <int> (n + m + 1), &ob)
        return [
            (ob.data[4 * i], ob.data[4 * i + 1], ob.data[4 * i + 2], ob.data[4 * i + 3])
            for i in range(ob.count)
        ]
    finally:
        free(ca); free(cb); free(vf); free(vr); free(ob.data)


def sweep_cost_check(int max_total, int n_symbols):
    """Check script cost against the LCS identity on every sequence pair.

    Enumerates all pairs (a, b) over ``n_symbols`` symbols with
    len(a) + len(b) <= max_total; returns (pairs_checked, mismatches).
    """
    cdef long long checked = 0, mismatches = 0
    cdef long long na, nb, ai, bi, t
    cdef int total, n, m, i, cost, lcs
    cdef int cap = max_total if max_total > 0 else 1
    cdef int* a = <int*> malloc(cap * sizeof(int))
    cdef int* b = <int*> malloc(cap * sizeof(int))
    cdef int* v = <int*> malloc((2 * cap + 3) * sizeof(int))
    cdef int* prev = <int*> malloc((cap + 1) * sizeof(int))
    cdef int* cur = <int*> malloc((cap + 1) * sizeof(int))
    if a == NULL or b == NULL or v == NULL or prev == NULL or cur == NULL:
        free(a); free(b); free(v); free(prev); free(cur)
        raise MemoryError()
    if n_symbols < 1:
        free(a); free(b); free(v); free(prev); free(cur)
        raise ValueError("n_symbols must be >= 1")
    try:
        with nogil:
            for total in range(max_total + 1):
                for n in range(total + 1):
                    m = total - n
                    na = 1
                    for i in range(n):
                        na *= n_symbols
                    nb = 1
                    for i in range(m):
                        nb *= n_symbols
                    for ai in range(na):
                        t = ai
                        for i in range(n):
                            a[i] = <int> (t % n_symbols)
                            t //= n_symbols
                        for bi in range(nb):
                            t = bi
                            for i in range(m):
                                b[i] = <int> (t % n_symbols)
                                t //= n_symbols
                            cost = _cost_win(a, 0, n, b, 0, m, v)
                            lcs = _lcs(a, n, b, m, prev, cur)
                            if cost != n + m - 2 * lcs:
                                mismatches += 1
                            checked += 1
    finally:
        free(a); free(b); free(v); free(prev); free(cur)
    return (checked, mismatches)
