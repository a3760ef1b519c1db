"""Compiled vs pure-Python kernel timings.

    python benchmarks/bench_kernels.py [--repeat 5] [--nx 400] [--nv 16]

Times the batched Thomas sweep, the block-tridiagonal sweep, the per-cell
quartic Newton solve and one full AP step on each backend, then prints a
table with the speed-up. Both backends must produce the same numbers; the
largest difference is reported alongside.
"""

import argparse
import timeit

import numpy as np

from radtrans import linalg
from radtrans import transport as tr
from radtrans.core import (
    BoundaryCondition,
    CompactParabola,
    Grid1D,
    PhysicalConstants,
    Striped,
    build_quadrature,
    init_transport_state,
)


def cases(nx, nv, rng):
    lower = rng.uniform(-1, 0, (nx, nv))
    upper = rng.uniform(-1, 0, (nx, nv))
    diag = 2.5 + rng.uniform(0, 1, (nx, nv))
    tri = linalg.Tridiagonal(lower, diag, upper)
    rhs = rng.normal(size=(nx, nv))

    eye = np.eye(nv)
    D = 4 * eye[None] + rng.uniform(-0.1, 0.1, (nx, nv, nv))
    L = -eye[None] * rng.uniform(0, 1, (nx, 1, 1))
    R = -eye[None] * rng.uniform(0, 1, (nx, 1, 1))
    blk = linalg.BlockTridiagonal(L, D, R)

    n = nx * nv
    alpha = rng.uniform(0.1, 10, n)
    beta = rng.uniform(0.1, 10, n)
    gamma = rng.uniform(0, 20, n)
    T0 = np.ones(n)

    grid, quad = Grid1D(0, 1, nx), build_quadrature(nv)
    consts = PhysicalConstants(epsilon=1e-3)
    state = init_transport_state(CompactParabola(), grid, quad, consts)
    bc = BoundaryCondition.isotropic(0.0, 0.0, nv)

    return {
        "thomas (nx x nv batch)": lambda: linalg.thomas_solve(tri, rhs),
        "block thomas": lambda: linalg.block_thomas_solve(blk, rhs),
        "quartic newton": lambda: linalg.newton_quartic(alpha, beta, gamma, T0).root,
        "ap_step": lambda: tr.ap_step(state, 1e-3, grid, quad, consts, Striped(0.2), bc)[0].E,
    }


def best_time(fn, repeat):
    number = max(1, int(0.2 / max(timeit.timeit(fn, number=1), 1e-6)))
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--nx", type=int, default=400)
    p.add_argument("--nv", type=int, default=16)
    args = p.parse_args(argv)

    try:
        linalg.use_backend("cython")
    except ImportError:
        print("compiled kernels not built; only the Python backend is available")
        return 1

    fns = cases(args.nx, args.nv, np.random.default_rng(0))
    print(f"nx={args.nx} nv={args.nv}, best of {args.repeat}")
    print(f"{'kernel':<24}{'cython [ms]':>14}{'python [ms]':>14}{'speed-up':>10}{'max diff':>11}")
    for name, fn in fns.items():
        times, outs = {}, {}
        for backend in ("cython", "python"):
            linalg.use_backend(backend)
            outs[backend] = np.asarray(fn())
            times[backend] = best_time(fn, args.repeat)
        diff = float(np.max(np.abs(outs["cython"] - outs["python"])))
        print(f"{name:<24}{1e3 * times['cython']:>14.3f}{1e3 * times['python']:>14.3f}"
              f"{times['python'] / times['cython']:>10.1f}{diff:>11.1e}")
    linalg.use_backend("cython")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
