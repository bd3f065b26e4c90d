"""Compare the compiled and numpy coordinate-descent backends.

Times single sweeps and full LASSO solves on the same instances and checks that
both backends reach the same solution.

    python benchmarks/bench_cd.py [--N 1000] [--repeat 5]
"""

import argparse
import time

import numpy as np

from amplab import _kernels
from amplab.amp import generate_instance
from amplab.harness import three_point_prior
from amplab.lasso import solve_lasso
from amplab.minimax import PhasePoint, maximin_lambda, phase_boundary


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def bench_sweep(inst, lam, backend, repeat):
    sweep = _kernels.get_cd_sweep(backend)
    A = np.asfortranarray(inst.A)
    col_sq = np.einsum("ij,ij->j", A, A)
    idx = np.arange(A.shape[1], dtype=np.intp)

    def run():
        x = np.zeros(A.shape[1])
        r = inst.y.copy()
        sweep(A, r, x, col_sq, lam, False, idx)
        return x
    return best_of(run, repeat)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=1000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = _kernels.available_backends()
    print(f"backends: {backends} (default {_kernels.BACKEND})")
    print(f"{'point':>14} {'backend':>8} {'sweep ms':>10} {'solve s':>9} {'max |dx|':>10}")
    for delta, frac in ((0.25, 0.5), (0.5, 0.5), (0.5, 0.9)):
        pt = PhasePoint(delta, frac * phase_boundary(delta))
        lam = maximin_lambda(pt)
        inst = generate_instance(delta, pt.rho, 1.0, three_point_prior(pt, 0.02), args.N, 1)
        ref = None
        for b in backends:
            t_sweep, _ = bench_sweep(inst, lam, b, args.repeat)
            t_solve, sol = best_of(lambda: solve_lasso(inst, lam, backend=b), max(1, args.repeat // 2))
            ref = sol.x if ref is None else ref
            dx = float(np.abs(sol.x - ref).max())
            print(f"({delta:.2f}, {pt.rho:.3f}) {b:>8} {1e3 * t_sweep:10.2f} {t_solve:9.3f} {dx:10.2e}")


if __name__ == "__main__":
    main()
