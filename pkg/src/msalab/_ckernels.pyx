# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; see ``_pykernels`` for the reference semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


def shell_max(f, lo, hi):
    fa = np.ascontiguousarray(f, dtype=np.float64)
    shape = fa.shape
    cdef int D = fa.ndim
    if D < 1 or D > 4:
        raise ValueError("shell_max supports 1 to 4 dimensions")
    cdef const double[::1] F = fa.ravel()
    cdef const long long[::1] LO = np.ascontiguousarray(
        np.broadcast_to(np.asarray(lo, dtype=np.int64), shape)).ravel()
    cdef const long long[::1] HI = np.ascontiguousarray(
        np.broadcast_to(np.asarray(hi, dtype=np.int64), shape)).ravel()
    out_arr = np.empty(F.shape[0], dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef long long n[4]
    cdef long long stride[4]
    cdef long long x[4]
    cdef long long w[4]
    cdef long long wlo[4]
    cdef long long whi[4]
    cdef int k, j
    cdef long long p, N = F.shape[0], a, b, r, q, off, t
    cdef double best, v
    for k in range(4):
        n[k] = 1
        stride[k] = 0
    for k in range(D):
        n[k] = shape[k]
    stride[D - 1] = 1
    for k in range(D - 2, -1, -1):
        stride[k] = stride[k + 1] * n[k + 1]
    for p in range(N):
        t = p
        for k in range(D - 1, -1, -1):
            x[k] = t % n[k]
            t //= n[k]
        a = LO[p]
        b = HI[p]
        best = -INFINITY
        if b >= 0 and a <= b:
            for k in range(D):
                wlo[k] = x[k] - b if x[k] - b > 0 else 0
                whi[k] = x[k] + b if x[k] + b < n[k] - 1 else n[k] - 1
                w[k] = wlo[k]
            while True:
                r = 0
                off = 0
                for k in range(D):
                    q = w[k] - x[k]
                    if q < 0:
                        q = -q
                    if q > r:
                        r = q
                    off += w[k] * stride[k]
                if r >= a:
                    v = F[off]
                    if v > best:
                        best = v
                    j = D - 1
                else:
                    # inside the hole: jump the last axis across it
                    j = D - 1
                    if w[j] < x[j] + a:
                        t = x[j] + a
                        if t > whi[j]:
                            t = whi[j]
                        if t > w[j]:
                            w[j] = t
                            continue
                # odometer increment
                while j >= 0:
                    w[j] += 1
                    if w[j] <= whi[j]:
                        break
                    w[j] = wlo[j]
                    j -= 1
                if j < 0:
                    break
        out[p] = best
    return out_arr.reshape(shape)


cdef int _grow(int count, int[:] cand, int ncand, unsigned char[:, ::1] free,
               int[:] best, int cap, int[:, ::1] work, int depth):
    cdef int pos, i, j, m
    if count > best[0]:
        best[0] = count
    if best[0] >= cap:
        return 1
    for pos in range(ncand):
        if count + ncand - pos <= best[0]:
            return 0
        i = cand[pos]
        m = 0
        for j in range(pos + 1, ncand):
            if free[i, cand[j]]:
                work[depth, m] = cand[j]
                m += 1
        if _grow(count + 1, work[depth], m, free, best, cap, work, depth + 1):
            return 1
    return 0


def max_disjoint(centers, long long ell, int cap):
    V = np.asarray(centers, dtype=np.int64)
    cdef int k = len(V)
    if k == 0 or cap <= 0:
        return 0
    V = V.reshape(k, -1)
    free_arr = (np.max(np.abs(V[:, None, :] - V[None, :, :]), axis=-1) > 2 * ell).astype(np.uint8)
    cdef unsigned char[:, ::1] free = free_arr
    cdef int[:] cand = np.arange(k, dtype=np.int32)
    cdef int[:, ::1] work = np.zeros((k + 1, k), dtype=np.int32)
    cdef int[:] best = np.zeros(1, dtype=np.int32)
    _grow(0, cand, k, free, best, cap, work, 0)
    return min(best[0], cap)
