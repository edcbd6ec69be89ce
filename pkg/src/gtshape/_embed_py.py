"""Pure-Python embedding search (fallback for the compiled kernel).

Both implementations run the same backtracking search and visit
candidates in the same order, so they return identical maps.
"""
from __future__ import annotations

import numpy as np

MAYBE = 1


def _le(a: int, b: int) -> bool:
    return a == b or b == MAYBE


def search_embedding(ua, ub, ba, bb):
    """Return ``f`` (array of target indices) embedding the source
    ``(ua, ba)`` into the target ``(ub, bb)``, or ``None``.

    ``ua``/``ub`` are ``(n, k)`` unary tables whose column 0 is ``sm``;
    ``ba``/``bb`` are ``(p, n, n)`` binary tables.
    """
    n, m = ua.shape[0], ub.shape[0]
    if n < m:
        return None
    if n == 0:
        return np.zeros(0, dtype=np.intp)
    if m == 0:
        return None
    UA, UB = ua.tolist(), ub.tolist()
    BA, BB = ba.tolist(), bb.tolist()
    npred = len(BA)
    nun = len(UA[0])

    cand = []
    for i in range(n):
        row = UA[i]
        ci = []
        for j in range(m):
            trow = UB[j]
            if all(_le(row[c], trow[c]) for c in range(nun)) and all(
                _le(BA[p][i][i], BB[p][j][j]) for p in range(npred)
            ):
                ci.append(j)
        if not ci:
            return None
        cand.append(ci)
    covered = [False] * m
    for ci in cand:
        for j in ci:
            covered[j] = True
    if not all(covered):
        return None

    order = sorted(range(n), key=lambda i: (len(cand[i]), i))
    f = [-1] * n
    count = [0] * m
    summary = [UB[j][0] == MAYBE for j in range(m)]

    def consistent(i, j, pos):
        for q in range(pos):
            i2 = order[q]
            j2 = f[i2]
            for p in range(npred):
                if not _le(BA[p][i][i2], BB[p][j][j2]) or not _le(BA[p][i2][i], BB[p][j2][j]):
                    return False
        return True

    def go(pos, uncovered):
        if pos == n:
            return uncovered == 0
        i = order[pos]
        left = n - pos - 1
        for j in cand[i]:
            if count[j] and not summary[j]:
                continue
            nu = uncovered - (count[j] == 0)
            if nu > left:
                continue
            if not consistent(i, j, pos):
                continue
            f[i] = j
            count[j] += 1
            if go(pos + 1, nu):
                return True
            count[j] -= 1
            f[i] = -1
        return False

    if go(0, m):
        return np.array(f, dtype=np.intp)
    return None
