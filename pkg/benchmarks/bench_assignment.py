"""Time the compiled assignment kernel against the pure-Python fallback.

Both kernels implement the same square-matrix solver, so this doubles as a
parity check: every timed instance is solved by both and the assignments
and dual vectors must agree exactly.

Usage:
    python3 benchmarks/bench_assignment.py --sizes 4,8,16,32,64 --trials 20
"""

import argparse
import sys
import time

import numpy as np

from ovfact import _lap_py

try:
    from ovfact import _lap as _lap_compiled
except ImportError:
    _lap_compiled = None


def time_solver(solve, matrices) -> float:
    """Seconds per solve, averaged over the batch."""
    start = time.perf_counter()
    for cost in matrices:
        solve(cost)
    return (time.perf_counter() - start) / len(matrices)


def check_parity(matrices) -> int:
    mismatches = 0
    for cost in matrices:
        row_c, u_c, v_c = _lap_compiled.solve_square(cost)
        row_p, u_p, v_p = _lap_py.solve_square(cost)
        if not (
            np.array_equal(row_c, row_p)
            and (u_c == u_p).all()
            and (v_c == v_p).all()
        ):
            mismatches += 1
    return mismatches


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="4,8,16,32,64")
    parser.add_argument("--trials", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    sizes = [int(part) for part in args.sizes.split(",")]

    rng = np.random.default_rng(args.seed)
    if _lap_compiled is None:
        print("compiled kernel not available; timing the pure-Python solver only")
    else:
        print(f"{'n':>5}  {'compiled':>12}  {'python':>12}  {'speedup':>8}  parity")

    failed = 0
    for size in sizes:
        matrices = [
            np.ascontiguousarray(rng.uniform(-1.0, 1.0, size=(size, size)))
            for _ in range(args.trials)
        ]
        python_s = time_solver(_lap_py.solve_square, matrices)
        if _lap_compiled is None:
            print(f"n={size:<4d} python {python_s * 1e3:9.3f} ms/solve")
            continue
        compiled_s = time_solver(_lap_compiled.solve_square, matrices)
        mismatches = check_parity(matrices)
        failed += mismatches
        parity = "ok" if mismatches == 0 else f"{mismatches} MISMATCHES"
        print(
            f"{size:>5}  {compiled_s * 1e3:>9.3f} ms  {python_s * 1e3:>9.3f} ms"
            f"  {python_s / compiled_s:>7.1f}x  {parity}"
        )

    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
