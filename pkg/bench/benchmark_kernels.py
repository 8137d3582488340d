"""
Compiled versus pure-Python kernels.

Times ``shell_max`` on the grids used by the subharmonic checks,
``max_disjoint`` on random singular-box sets and one full synthetic
subharmonic construction, with each backend, and checks the two backends
agree on every input.

    python3 bench/benchmark_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from msalab import _pykernels

try:
    from msalab import _ckernels
except ImportError:
    _ckernels = None


def shell_case(L, D, ell, seed=0):
    rng = np.random.default_rng(seed)
    shape = (2 * L + 1,) * D
    f = rng.random(shape)
    lo = np.full(shape, ell - 1)
    hi = np.full(shape, ell)
    # a patch of wider shells, as inside a singular cluster
    patch = tuple(slice(L - ell, L + ell + 1) for _ in range(D))
    lo[patch], hi[patch] = 2 * ell, 4 * ell - 1
    return f, lo, hi


def disjoint_case(k, ell, seed=0):
    rng = np.random.default_rng(seed)
    return rng.integers(-6 * ell, 6 * ell + 1, size=(k, 2)), ell


def descent_case(L, D, ell, q, impl, seed=0):
    # fixed-point construction of a synthetic subharmonic function
    rng = np.random.default_rng(seed)
    f, lo, hi = shell_case(L, D, ell, seed)
    idx = np.indices(f.shape) - L
    exempt = np.max(np.abs(idx), axis=0) > L - ell
    f = np.where(exempt, rng.random(f.shape), 0.0)
    for _ in range(500):
        new = np.where(exempt, f, q * impl.shell_max(f, lo, hi))
        if np.array_equal(new, f):
            break
        f = new
    return f


def best_of(stmt, repeat):
    return min(timeit.repeat(stmt, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.strip().splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    impls = {"python": _pykernels}
    if _ckernels is not None:
        impls["cython"] = _ckernels
    else:
        print("compiled extension not built; timing the Python fallback only")

    rows = []
    for L, D, ell in ((60, 1, 8), (200, 1, 8), (23, 2, 4), (45, 2, 5)):
        case = shell_case(L, D, ell)
        out = {n: m.shell_max(*case) for n, m in impls.items()}
        agree = all(np.array_equal(out["python"], o) for o in out.values())
        t = {n: best_of(lambda m=m: m.shell_max(*case), args.repeat) for n, m in impls.items()}
        rows.append((f"shell_max L={L} D={D} ell={ell}", t, agree))
    for k, ell in ((8, 2), (16, 3), (24, 4)):
        V, ell = disjoint_case(k, ell)
        out = {n: int(m.max_disjoint(V, ell, k)) for n, m in impls.items()}
        agree = len(set(out.values())) == 1
        t = {n: best_of(lambda m=m: m.max_disjoint(V, ell, k), args.repeat)
             for n, m in impls.items()}
        rows.append((f"max_disjoint k={k} ell={ell}", t, agree))
    for L, D, ell in ((60, 1, 4), (23, 2, 3)):
        out = {n: descent_case(L, D, ell, 0.5, m) for n, m in impls.items()}
        agree = all(np.array_equal(out["python"], o) for o in out.values())
        t = {n: best_of(lambda m=m: descent_case(L, D, ell, 0.5, m), max(1, args.repeat // 2))
             for n, m in impls.items()}
        rows.append((f"synthetic descent L={L} D={D} ell={ell}", t, agree))

    names = list(impls)
    print(f"{'case':38s}" + "".join(f"{n + ' [ms]':>14s}" for n in names)
          + ("    speed-up" if len(names) > 1 else "") + "  agree")
    for label, t, agree in rows:
        line = f"{label:38s}" + "".join(f"{1e3 * t[n]:14.3f}" for n in names)
        if len(names) > 1:
            line += f"{t['python'] / t['cython']:11.1f}x"
        print(line + f"  {'yes' if agree else 'NO'}")


if __name__ == "__main__":
    main()
