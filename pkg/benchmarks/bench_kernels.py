"""Compare the compiled and pure-Python frustration kernels.

Usage::

    python3 benchmarks/bench_kernels.py [--sizes 16 32 64] [--repeat 3]

Reports the best wall time of each kernel on the full vertex set of a torus
with constant potential, plus end-to-end ``frustration_index`` with the
selected backend swapped in.
"""

import argparse
import time

import numpy as np

from magspec import cheeger, geometry, kernels, magnetic


def _best(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _problem(n):
    M = geometry.torus_grid(2 * np.pi, 2 * np.pi, n, n)
    P = magnetic.torus_constant(M, 0.3, 0.4)
    idx = np.arange(M.n_vertices)
    lu, lv, th, q = cheeger._induced(M, P, idx)
    return M, P, cheeger._incidence_csr(len(idx), lu, lv, th, q)


def _end_to_end(k, M, P):
    saved = (kernels.frustration_objective, kernels.frustration_descent, kernels.tree_gauge)
    kernels.frustration_objective = k.frustration_objective
    kernels.frustration_descent = k.frustration_descent
    kernels.tree_gauge = k.tree_gauge
    try:
        return cheeger.frustration_index(M, P, np.arange(M.n_vertices))
    finally:
        kernels.frustration_objective, kernels.frustration_descent, kernels.tree_gauge = saved


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[16, 32, 64])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    names = ["python"]
    try:
        kernels.backend("cython")
        names.append("cython")
    except ImportError:
        print("compiled kernels not built; timing the Python backend only")
    impls = {name: kernels.backend(name) for name in names}

    print(f"{'n':>4} {'kernel':<12} " + " ".join(f"{name:>10}" for name in names) + f" {'speedup':>8}")
    for n in args.sizes:
        M, P, g = _problem(n)
        psi0 = np.random.default_rng(n).uniform(-np.pi, np.pi, M.n_vertices)
        rows = {
            "objective": lambda k: k.frustration_objective(*g, psi0),
            "descent": lambda k: k.frustration_descent(*g, psi0.copy(), 10_000, 1e-10),
            "index": lambda k: _end_to_end(k, M, P),
        }
        for label, fn in rows.items():
            t = {name: _best(lambda: fn(impls[name]), args.repeat) for name in names}
            cells = " ".join(f"{t[name] * 1e3:9.2f}ms" for name in names)
            speed = f"{t['python'] / t['cython']:7.1f}x" if "cython" in t else ""
            print(f"{n:>4} {label:<12} {cells} {speed}")


if __name__ == "__main__":
    main()
