# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled embedding search. Mirrors ``gtshape._embed_py`` exactly."""
import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free

cnp.import_array()

ctypedef unsigned char u8


cdef inline bint le(u8 a, u8 b) nogil:
    return a == b or b == 1


cdef bint _search(const u8[:, ::1] ua, const u8[:, ::1] ub,
                  const u8[:, :, ::1] ba, const u8[:, :, ::1] bb,
                  int* cand, int* ncand, int* order, int* f, int* count,
                  int* pos_choice) nogil:
    cdef int n = ua.shape[0]
    cdef int m = ub.shape[0]
    cdef int npred = ba.shape[0]
    cdef int pos = 0, i, j, q, i2, j2, p, k, uncovered = m
    cdef bint ok
    pos_choice[0] = -1
    while pos >= 0:
        if pos == n:
            if uncovered == 0:
                return True
            pos -= 1
            i = order[pos]
            j = f[i]
            count[j] -= 1
            if count[j] == 0:
                uncovered += 1
            f[i] = -1
            continue
        i = order[pos]
        k = pos_choice[pos] + 1
        ok = False
        while k < ncand[i]:
            j = cand[i * m + k]
            if count[j] > 0 and ub[j, 0] != 1:
                k += 1
                continue
            if uncovered - (1 if count[j] == 0 else 0) > n - pos - 1:
                k += 1
                continue
            ok = True
            for q in range(pos):
                i2 = order[q]
                j2 = f[i2]
                for p in range(npred):
                    if not le(ba[p, i, i2], bb[p, j, j2]) or not le(ba[p, i2, i], bb[p, j2, j]):
                        ok = False
                        break
                if not ok:
                    break
            if ok:
                break
            k += 1
        if ok:
            pos_choice[pos] = k
            f[i] = j
            if count[j] == 0:
                uncovered -= 1
            count[j] += 1
            pos += 1
            if pos < n:
                pos_choice[pos] = -1
        else:
            pos -= 1
            if pos >= 0:
                i = order[pos]
                j = f[i]
                count[j] -= 1
                if count[j] == 0:
                    uncovered += 1
                f[i] = -1
    return False


def search_embedding(ua, ub, ba, bb):
    cdef int n = ua.shape[0]
    cdef int m = ub.shape[0]
    if n < m:
        return None
    if n == 0:
        return np.zeros(0, dtype=np.intp)
    if m == 0:
        return None
    cdef const u8[:, ::1] UA = np.ascontiguousarray(ua, dtype=np.uint8)
    cdef const u8[:, ::1] UB = np.ascontiguousarray(ub, dtype=np.uint8)
    cdef const u8[:, :, ::1] BA = np.ascontiguousarray(ba, dtype=np.uint8).reshape(ba.shape[0], n, n)
    cdef const u8[:, :, ::1] BB = np.ascontiguousarray(bb, dtype=np.uint8).reshape(bb.shape[0], m, m)
    cdef int nun = UA.shape[1]
    cdef int npred = BA.shape[0]
    cdef int* cand = <int*> malloc(n * m * sizeof(int))
    cdef int* ncand = <int*> malloc(n * sizeof(int))
    cdef int* f = <int*> malloc(n * sizeof(int))
    cdef int* count = <int*> malloc(m * sizeof(int))
    cdef int* covered = <int*> malloc(m * sizeof(int))
    cdef int* pos_choice = <int*> malloc(n * sizeof(int))
    cdef int i, j, c, p
    cdef bint good, found = False
    order = None
    try:
        for j in range(m):
            covered[j] = 0
            count[j] = 0
        for i in range(n):
            f[i] = -1
            ncand[i] = 0
            for j in range(m):
                good = True
                for c in range(nun):
                    if not le(UA[i, c], UB[j, c]):
                        good = False
                        break
                if good:
                    for p in range(npred):
                        if not le(BA[p, i, i], BB[p, j, j]):
                            good = False
                            break
                if good:
                    cand[i * m + ncand[i]] = j
                    ncand[i] += 1
                    covered[j] = 1
            if ncand[i] == 0:
                return None
        for j in range(m):
            if not covered[j]:
                return None
        order_list = sorted(range(n), key=lambda x: (ncand[x], x))
        order_arr = np.array(order_list, dtype=np.intc)
        order = order_arr
        found = _search(UA, UB, BA, BB, cand, ncand,
                        <int*> cnp.PyArray_DATA(order_arr), f, count, pos_choice)
        if not found:
            return None
        return np.array([f[i] for i in range(n)], dtype=np.intp)
    finally:
        free(cand); free(ncand); free(f); free(count); free(covered); free(pos_choice)
