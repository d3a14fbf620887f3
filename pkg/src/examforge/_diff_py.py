"""Pure-Python line diff kernel.

Fallback for :mod:`examforge._diff_c`; same contract, same algorithms,
roughly 30-50x slower. Sequences are lists/tuples of comparable items
(the public wrapper interns lines to ints before calling in).

``edit_hunks`` and ``edit_cost`` implement the divide-and-conquer
shortest-edit-script search (greedy furthest-reaching D-paths with a
middle-snake split, linear space). ``lcs_length`` is a classic dynamic
program kept deliberately independent so the two can cross-check each
other: minimal script cost == len(a) + len(b) - 2 * lcs_length(a, b).
"""
from __future__ import annotations

from itertools import product


def lcs_length(a, b) -> int:
    """Length of the longest common subsequence (row-rolling DP)."""
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        return 0
    prev = [0] * (m + 1)
    for i in range(1, n + 1):
        cur = [0] * (m + 1)
        ai = a[i - 1]
        for j in range(1, m + 1):
            if ai == b[j - 1]:
                cur[j] = prev[j - 1] + 1
            elif prev[j] >= cur[j - 1]:
                cur[j] = prev[j]
            else:
                cur[j] = cur[j - 1]
        prev = cur
    return prev[m]


def edit_cost(a, b) -> int:
    """Cost (deleted + inserted lines) of a minimal edit script."""
    n, m = len(a), len(b)
    a0 = b0 = 0
    while a0 < n and b0 < m and a[a0] == b[b0]:
        a0 += 1
        b0 += 1
    while n > a0 and m > b0 and a[n - 1] == b[m - 1]:
        n -= 1
        m -= 1
    n -= a0
    m -= b0
    if n == 0:
        return m
    if m == 0:
        return n
    v = {1: 0}
    for d in range(n + m + 1):
        for k in range(-d, d + 1, 2):
            if k == -d or (k != d and v[k - 1] < v[k + 1]):
                x = v[k + 1]
            else:
                x = v[k - 1] + 1
            y = x - k
            while x < n and y < m and a[a0 + x] == b[b0 + y]:
                x += 1
                y += 1
            v[k] = x
            if x >= n and y >= m:
                return d
    raise AssertionError("unreachable: search exhausted without reaching the end")


def edit_hunks(a, b) -> list[tuple[int, int, int, int]]:
    """Minimal edit script as merged hunks (a_start, deleted, b_start, inserted).

    Hunks are ordered by position and maximal: consecutive edits with no
    equal lines between them form a single hunk.
    """
    out: list[list[int]] = []
    _recurse(a, 0, len(a), b, 0, len(b), out)
    return [tuple(h) for h in out]


def _emit(out: list[list[int]], a0: int, deleted: int, b0: int, inserted: int) -> None:
    if out:
        last = out[-1]
        if last[0] + last[1] == a0 and last[2] + last[3] == b0:
            last[1] += deleted
            last[3] += inserted
            return
    out.append([a0, deleted, b0, inserted])


def _recurse(a, a0: int, n: int, b, b0: int, m: int, out: list[list[int]]) -> None:
    while n > 0 and m > 0 and a[a0] == b[b0]:
        a0 += 1
        b0 += 1
        n -= 1
        m -= 1
    while n > 0 and m > 0 and a[a0 + n - 1] == b[b0 + m - 1]:
        n -= 1
        m -= 1
    if n == 0 and m == 0:
        return
    if n == 0 or m == 0:
        _emit(out, a0, n, b0, m)
        return
    # Ends differ on both sides here, so the subproblem cost is >= 2 and
    # both recursive halves are strictly smaller: termination is guaranteed.
    _d, x, y, u, v = _middle_snake(a, a0, n, b, b0, m)
    _recurse(a, a0, x, b, b0, y, out)
    _recurse(a, a0 + u, n - u, b, b0 + v, m - v, out)


def _middle_snake(a, a0: int, n: int, b, b0: int, m: int):
    """Locate a middle snake (x, y)->(u, v) of a minimal path; returns its cost too.

    Forward search runs on the sequences as-is; the reverse search is a
    forward search on the reversed windows, mapped back at the end.
    """
    delta = n - m
    odd = delta & 1
    vf = {1: 0}
    vr = {1: 0}
    dmax = (n + m + 1) // 2 + 1
    for d in range(dmax + 1):
        for k in range(-d, d + 1, 2):
            if k == -d or (k != d and vf[k - 1] < vf[k + 1]):
                x = vf[k + 1]
            else:
                x = vf[k - 1] + 1
            y = x - k
            sx, sy = x, y
            while x < n and y < m and a[a0 + x] == b[b0 + y]:
                x += 1
                y += 1
            vf[k] = x
            if odd and -(d - 1) <= k - delta <= d - 1 and x + vr[delta - k] >= n:
                return 2 * d - 1, sx, sy, x, y
        for k in range(-d, d + 1, 2):
            if k == -d or (k != d and vr[k - 1] < vr[k + 1]):
                x = vr[k + 1]
            else:
                x = vr[k - 1] + 1
            y = x - k
            sx, sy = x, y
            while x < n and y < m and a[a0 + n - 1 - x] == b[b0 + m - 1 - y]:
                x += 1
                y += 1
            vr[k] = x
            if not odd and -d <= delta - k <= d and x + vf[delta - k] >= n:
                return 2 * d, n - x, m - y, n - sx, m - sy
    raise AssertionError("unreachable: no middle snake found")


def sweep_cost_check(max_total: int, n_symbols: int) -> tuple[int, int]:
    """Check script cost against the LCS identity on every sequence pair.

    Enumerates all pairs (a, b) over ``n_symbols`` symbols with
    len(a) + len(b) <= max_total and counts pairs where the minimal script
    cost disagrees with len(a) + len(b) - 2 * LCS. Returns
    (pairs_checked, mismatches).
    """
    checked = 0
    mismatches = 0
    symbols = range(n_symbols)
    for total in range(max_total + 1):
        for n in range(total + 1):
            m = total - n
            for seq_a in product(symbols, repeat=n):
                for seq_b in product(symbols, repeat=m):
                    cost = edit_cost(seq_a, seq_b)
                    if cost != n + m - 2 * lcs_length(seq_a, seq_b):
                        mismatches += 1
                    checked += 1
    return checked, mismatches
