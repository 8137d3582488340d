"""Pure-Python reference versions of the compiled kernels."""

import numpy as np
from scipy import ndimage


def shell_max(f, lo, hi):
    """For each grid point x, ``max f(w)`` over ``lo[x] <= ||w - x|| <= hi[x]``.

    Points whose shell misses the grid get ``-inf``.
    """
    f = np.asarray(f, dtype=float)
    lo = np.broadcast_to(np.asarray(lo, dtype=np.int64), f.shape)
    hi = np.broadcast_to(np.asarray(hi, dtype=np.int64), f.shape)
    D = f.ndim
    out = np.full(f.shape, -np.inf)
    pairs = np.unique(np.stack([lo.ravel(), hi.ravel()], axis=1), axis=0)
    for a, b in pairs:
        a, b = int(a), int(b)
        sel = (lo == a) & (hi == b)
        if b < 0 or a > b:
            continue
        a = max(a, 0)
        pad = b
        fp = np.pad(f, pad, constant_values=-np.inf)
        best = np.full(f.shape, -np.inf)
        # the shell is the union of 2D slabs: one axis at offset +-[a, b],
        # the others within [-b, b]
        for k in range(D):
            for sign in (1, -1):
                size = [2 * b + 1] * D
                size[k] = b - a + 1
                m = ndimage.maximum_filter(fp, size=size, mode="constant", cval=-np.inf)
                idx = []
                for j in range(D):
                    start = (a if sign > 0 else -b) if j == k else -b
                    s = pad + start + size[j] // 2
                    idx.append(slice(s, s + f.shape[j]))
                best = np.maximum(best, m[tuple(idx)])
        out[sel] = best[sel]
    return out


def max_disjoint(centers, ell, cap):
    """Largest number of pairwise disjoint radius-``ell`` cubes, stopping at ``cap``."""
    V = np.asarray(centers, dtype=np.int64)
    k = len(V)
    if k == 0 or cap <= 0:
        return 0
    V = V.reshape(k, -1)
    free = np.max(np.abs(V[:, None, :] - V[None, :, :]), axis=-1) > 2 * ell
    best = [0]

    def grow(count, cand):
        if count > best[0]:
            best[0] = count
        if best[0] >= cap:
            return
        for pos, i in enumerate(cand):
            rest = cand[pos + 1:]
            if count + 1 + len(rest) <= best[0]:
                return
            grow(count + 1, [j for j in rest if free[i, j]])
            if best[0] >= cap:
                return

    grow(0, list(range(k)))
    return min(best[0], cap)
